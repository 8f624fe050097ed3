#include <doctest.h>

#include <cmath>

#include "dudospect/errors.hpp"
#include "dudospect/projector.hpp"
#include "dudospect/rng.hpp"
#include "oracles.hpp"

using namespace dudospect;

namespace {

VolumeTensor random_volume(const GridSpec& grid, uint64_t seed) {
    auto v = VolumeTensor::zeros(grid);
    Rng rng(seed);
    for (auto& x : v.data) x = rng.next_double();
    return v;
}

ProjectionTensor random_projection_like(const SystemOperator& op, uint64_t seed) {
    const auto& d0 = op.geometry.detectors[0];
    auto p = ProjectionTensor::zeros(d0.bins_u, d0.bins_v, op.geometry.num_detectors());
    Rng rng(seed);
    for (auto& v : p.data) v = rng.next_double();
    return p;
}

double dot_all(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm_all(const std::vector<double>& a) { return std::sqrt(dot_all(a, a)); }

}  // namespace

TEST_CASE("zero volume projects to zero; zero projection backprojects to zero") {
    const auto op = make_system_operator(build_default_geometry({16, 16, 16}, {16, 16}));
    const auto zero_vol = VolumeTensor::zeros(op.geometry.image_grid);
    CHECK(forward_project(op, zero_vol).sum() == 0.0);
    const auto zero_proj = ProjectionTensor::zeros(16, 16, 19);
    CHECK(back_project(op, zero_proj).sum() == 0.0);
}

TEST_CASE("forward projection is linear") {
    const auto op = make_system_operator(build_default_geometry({16, 16, 16}, {16, 16}));
    const auto x = random_volume(op.geometry.image_grid, 11);
    const auto y = random_volume(op.geometry.image_grid, 12);

    auto x2 = x;
    for (auto& v : x2.data) v *= 2.0;
    const auto fx = forward_project(op, x);
    const auto fx2 = forward_project(op, x2);
    for (size_t i = 0; i < fx.data.size(); ++i)
        CHECK(fx2.data[i] == doctest::Approx(2.0 * fx.data[i]).epsilon(1e-12));

    Rng rng(13);
    const double a = rng.next_uniform(0.1, 2.0), b = rng.next_uniform(0.1, 2.0);
    auto combo = x;
    for (size_t i = 0; i < combo.data.size(); ++i) combo.data[i] = a * x.data[i] + b * y.data[i];
    const auto fc = forward_project(op, combo);
    const auto fy = forward_project(op, y);
    for (size_t i = 0; i < fc.data.size(); ++i)
        CHECK(fc.data[i] ==
              doctest::Approx(a * fx.data[i] + b * fy.data[i]).epsilon(1e-10).scale(1.0));
}

TEST_CASE("point source matches the independent ray-tracing oracle") {
    const auto geometry = build_default_geometry({32, 32, 32}, {32, 32});
    const auto op = make_system_operator(geometry);
    auto vol = VolumeTensor::zeros(geometry.image_grid);
    vol.at(16, 16, 16) = 1.0;
    const auto fx = forward_project(op, vol);
    const auto expected = oracles::point_source_projection(geometry, 16, 16, 16);
    REQUIRE(fx.data.size() == expected.data.size());
    CHECK(fx.sum() > 0.0);
    for (size_t i = 0; i < fx.data.size(); ++i)
        CHECK(fx.data[i] == doctest::Approx(expected.data[i]).epsilon(1e-6).scale(1e-3));
}

TEST_CASE("adjointness: <Fx, p> == <x, F^T p> over 20 random pairs") {
    const auto op = make_system_operator(build_default_geometry({16, 16, 16}, {16, 16}));
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_volume(op.geometry.image_grid, 1000 + uint64_t(trial));
        const auto p = random_projection_like(op, 2000 + uint64_t(trial));
        const auto fx = forward_project(op, x);
        const auto ftp = back_project(op, p);
        const double lhs = dot_all(fx.data, p.data);
        const double rhs = dot_all(x.data, ftp.data);
        const double scale = norm_all(fx.data) * norm_all(p.data);
        CHECK(std::abs(lhs - rhs) / scale < 1e-5);
    }
}

TEST_CASE("adjointness holds with attenuation enabled") {
    const auto geometry = build_default_geometry({16, 16, 16}, {16, 16});
    auto mu = VolumeTensor::zeros(geometry.image_grid);
    Rng rng(5);
    for (auto& v : mu.data) v = 0.02 * rng.next_double();  // ~water-ish per mm
    const auto op = make_system_operator(geometry, mu);
    for (int trial = 0; trial < 5; ++trial) {
        const auto x = random_volume(geometry.image_grid, 3000 + uint64_t(trial));
        const auto p = random_projection_like(op, 4000 + uint64_t(trial));
        const double lhs = dot_all(forward_project(op, x).data, p.data);
        const double rhs = dot_all(x.data, back_project(op, p).data);
        CHECK(std::abs(lhs - rhs) /
                  (norm_all(forward_project(op, x).data) * norm_all(p.data)) < 1e-5);
    }
}

TEST_CASE("attenuation only reduces bin values") {
    const auto geometry = build_default_geometry({16, 16, 16}, {16, 16});
    auto mu = VolumeTensor::zeros(geometry.image_grid);
    Rng rng(6);
    for (auto& v : mu.data) v = 0.05 * rng.next_double();
    const auto plain = make_system_operator(geometry);
    const auto attenuated = make_system_operator(geometry, mu);
    const auto x = random_volume(geometry.image_grid, 77);
    const auto f0 = forward_project(plain, x);
    const auto f1 = forward_project(attenuated, x);
    for (size_t i = 0; i < f0.data.size(); ++i) CHECK(f1.data[i] <= f0.data[i] + 1e-12);
}

TEST_CASE("masking commutes with projection") {
    const auto geometry = build_default_geometry({16, 16, 16}, {16, 16});
    const auto op = make_system_operator(geometry);
    const auto mask = central_column_mask(geometry);
    const auto x = random_volume(geometry.image_grid, 21);
    const auto full_then_mask = apply_angle_mask(forward_project(op, x), mask, MaskMode::zero_fill);
    const auto restricted = forward_project_masked(op, x, mask);
    CHECK(full_then_mask.data == restricted.data);
}

TEST_CASE("sensitivity image definition and masking monotonicity") {
    const auto geometry = build_default_geometry({16, 16, 16}, {16, 16});
    const auto op = make_system_operator(geometry);
    const auto full = AngleMask::all_true(19);
    const auto central = central_column_mask(geometry);

    auto ones = ProjectionTensor::zeros(16, 16, 19);
    std::fill(ones.data.begin(), ones.data.end(), 1.0);
    const auto sens_full = sensitivity_image(op, full);
    const auto bp_ones = back_project(op, ones);
    CHECK(sens_full.data == bp_ones.data);

    const auto sens_central = sensitivity_image(op, central);
    for (size_t i = 0; i < sens_full.data.size(); ++i)
        CHECK(sens_central.data[i] <= sens_full.data[i] + 1e-15);

    // strictly positive inside the field of view (inscribed half-radius ball)
    const auto& grid = geometry.image_grid;
    const double fov = 0.25 * grid.nx * grid.voxel_size_mm;
    for (int ix = 0; ix < grid.nx; ++ix)
        for (int iy = 0; iy < grid.ny; ++iy)
            for (int iz = 0; iz < grid.nz; ++iz) {
                const double x = grid.origin_mm[0] + ix * grid.voxel_size_mm;
                const double y = grid.origin_mm[1] + iy * grid.voxel_size_mm;
                const double z = grid.origin_mm[2] + iz * grid.voxel_size_mm;
                if (x * x + y * y + z * z < fov * fov) CHECK(sens_full.at(ix, iy, iz) > 0.0);
            }
}

TEST_CASE("sensitivity respects the geometry's mirror symmetries") {
    const auto geometry = build_default_geometry({16, 16, 16}, {16, 16});
    const auto op = make_system_operator(geometry);
    const auto sens = sensitivity_image(op, AngleMask::all_true(19));
    const auto& g = geometry.image_grid;
    const double tol = 1e-6 * (*std::max_element(sens.data.begin(), sens.data.end()));
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iy = 0; iy < g.ny; ++iy)
            for (int iz = 0; iz < g.nz; ++iz) {
                // top/bottom columns mirror in z, the azimuth arc mirrors in y
                CHECK(std::abs(sens.at(ix, iy, iz) - sens.at(ix, iy, g.nz - 1 - iz)) <= tol);
                CHECK(std::abs(sens.at(ix, iy, iz) - sens.at(ix, g.ny - 1 - iy, iz)) <= tol);
            }
}

TEST_CASE("shape and NaN validation") {
    const auto op = make_system_operator(build_default_geometry({16, 16, 16}, {16, 16}));
    GridSpec other = op.geometry.image_grid;
    other.nx = 8;
    CHECK_THROWS_AS(forward_project(op, VolumeTensor::zeros(other)), ShapeError);
    CHECK_THROWS_AS(back_project(op, ProjectionTensor::zeros(8, 8, 19)), ShapeError);

    auto bad = VolumeTensor::zeros(op.geometry.image_grid);
    bad.data[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward_project(op, bad), ValidationError);
}

TEST_CASE("multi-ray sampling stays consistent with single-ray") {
    const auto geometry = build_default_geometry({16, 16, 16}, {16, 16});
    const auto one = make_system_operator(geometry, std::nullopt, 1);
    const auto four = make_system_operator(geometry, std::nullopt, 2);
    const auto x = random_volume(geometry.image_grid, 9);
    const auto f1 = forward_project(one, x);
    const auto f4 = forward_project(four, x);
    // sub-ray averaging changes values only slightly on a smooth-ish field
    CHECK(std::abs(f1.sum() - f4.sum()) / f1.sum() < 0.05);
}
