#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dudospect/geometry.hpp"
#include "dudospect/phantom.hpp"
#include "dudospect/projector.hpp"

namespace dudospect {

struct DatasetConfig {
    GeometryParams geometry;
    PhantomFamily phantom_family = PhantomFamily::cardiac_ellipsoid;
    double myo_bg_ratio = 4.0;
    double defect_probability = 0.25;
    int train_cases = 40, val_cases = 8, test_cases = 16;
    double dose_ratio = 0.1;
    double total_counts = 2e6;  // expected full-dose counts per case
    int mlem_iterations = 30;
    uint64_t master_seed = 20260809;
    std::string out_dir;
};

// One simulated study: full-dose/few-angle projections at every stage of
// the degradation chain plus the two MLEM reconstructions.
struct DatasetCase {
    std::string case_id;
    ProjectionTensor p_fd_19a;  // full-dose counts, all detectors
    ProjectionTensor p_fd_9a;   // central columns only (zero_fill)
    ProjectionTensor p_ld_9a;   // thinned + masked (zero_fill)
    VolumeTensor i_fd_19a;      // MLEM of p_fd_19a, full mask
    VolumeTensor i_ld_9a;       // MLEM of p_ld_9a, central mask
    VolumeTensor phantom;       // ground-truth activity
    double dose_ratio = 1.0;
};

struct CaseRecord {
    std::string id;
    std::string file;  // blob path relative to the dataset root
    std::string crc32;
    std::string phantom_crc32;
    double sum_fd19 = 0.0, sum_fd9 = 0.0, sum_ld9 = 0.0;
};

struct DatasetManifest {
    std::string root_dir;  // set on load/build, not serialized
    ScannerGeometry geometry;
    uint64_t master_seed = 0;
    double dose_ratio = 0.1;
    double total_counts = 0.0;
    int mlem_iterations = 30;
    // Input normalization: a single dataset-level constant derived from
    // the mean full-dose total counts over the training split.
    double norm_mean_fd_counts = 0.0;
    double norm_per_bin_scale = 1.0;
    std::vector<std::string> train_ids, val_ids, test_ids;
    std::vector<CaseRecord> cases;

    const CaseRecord& record(const std::string& id) const;
    const std::vector<std::string>& split_ids(const std::string& split) const;
    std::string to_json_string() const;
    static DatasetManifest from_json_string(const std::string& text, std::string root_dir);
    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);
    // Recomputes blob checksums; throws ValidationError on mismatch.
    void verify_checksums() const;
};

// Simulates the full dataset: phantom -> forward projection -> Poisson
// counts -> angle masking / dose thinning -> MLEM reconstructions, then
// writes per-case blobs plus the manifest. Deterministic in master_seed;
// phantoms and full-dose counts are independent of dose_ratio so dose
// sweeps share them.
DatasetManifest build_dataset(const DatasetConfig& config);

DatasetCase load_case(const DatasetManifest& manifest, const std::string& id);

// Seed tree used by build_dataset, exposed for collision checks/tests.
uint64_t case_seed(uint64_t master_seed, const std::string& stream, int case_index);

}  // namespace dudospect
