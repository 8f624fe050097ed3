#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dudospect/geometry.hpp"
#include "dudospect/tensors.hpp"

namespace dudospect {

enum class PhantomFamily { cardiac_ellipsoid, hot_spheres, uniform_cylinder };

std::string to_string(PhantomFamily family);
PhantomFamily phantom_family_from_string(const std::string& s);

struct DefectSpec {
    Vec3 position_mm{0.0, 0.0, 0.0};
    double radius_mm = 0.0;
    double severity = 1.0;  // 0..1, fraction of activity removed
};

struct PhantomSpec {
    PhantomFamily family = PhantomFamily::cardiac_ellipsoid;
    double myocardium_to_background_ratio = 4.0;
    std::optional<DefectSpec> defect;
    uint64_t rng_seed = 0;
};

// Deterministic synthetic activity volume. The cardiac family builds an
// ellipsoidal myocardial shell with seeded pose jitter; severity-1 defects
// zero the shell inside the defect sphere.
VolumeTensor generate_phantom(const PhantomSpec& spec, const GridSpec& grid);

// Scales p_clean so its expected total equals total_counts, then draws
// independent Poisson counts per bin.
ProjectionTensor poisson_emit(const ProjectionTensor& p_clean, uint64_t total_counts,
                              uint64_t rng_seed);

// Per-bin Binomial(count, dose_ratio) thinning, the projection-domain
// equivalent of decimating list-mode events.
ProjectionTensor thin_counts(const ProjectionTensor& p_counts, double dose_ratio,
                             uint64_t rng_seed);

}  // namespace dudospect
