#include "dudospect/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dudospect/archive.hpp"
#include "dudospect/errors.hpp"
#include "dudospect/mlem.hpp"
#include "dudospect/rng.hpp"

namespace dudospect {

namespace fs = std::filesystem;
using nlohmann::json;

uint64_t case_seed(uint64_t master_seed, const std::string& stream, int case_index) {
    return derive_seed(derive_seed(master_seed, stream), "case", static_cast<uint64_t>(case_index));
}

namespace {

std::vector<float> to_f32(const std::vector<double>& v) {
    return std::vector<float>(v.begin(), v.end());
}

void put_projection(TensorArchive& ar, const std::string& name, const ProjectionTensor& p) {
    ar.put_f32(name,
               {static_cast<uint64_t>(p.bins_u), static_cast<uint64_t>(p.bins_v),
                static_cast<uint64_t>(p.n_angles)},
               to_f32(p.data));
}

void put_volume(TensorArchive& ar, const std::string& name, const VolumeTensor& v) {
    ar.put_f32(name,
               {static_cast<uint64_t>(v.grid.nx), static_cast<uint64_t>(v.grid.ny),
                static_cast<uint64_t>(v.grid.nz)},
               to_f32(v.data));
}

ProjectionTensor get_projection(const TensorArchive& ar, const std::string& name,
                                const std::string& geometry_id) {
    const NamedTensor& t = ar.get(name);
    if (t.shape.size() != 3) throw IoError("blob tensor '" + name + "' has wrong rank");
    ProjectionTensor p = ProjectionTensor::zeros(static_cast<int>(t.shape[0]),
                                                 static_cast<int>(t.shape[1]),
                                                 static_cast<int>(t.shape[2]), geometry_id);
    p.data = t.as_f64();
    return p;
}

VolumeTensor get_volume(const TensorArchive& ar, const std::string& name, const GridSpec& grid) {
    const NamedTensor& t = ar.get(name);
    if (t.shape.size() != 3 || static_cast<int>(t.shape[0]) != grid.nx ||
        static_cast<int>(t.shape[1]) != grid.ny || static_cast<int>(t.shape[2]) != grid.nz)
        throw IoError("blob tensor '" + name + "' does not match the dataset grid");
    VolumeTensor v = VolumeTensor::zeros(grid);
    v.data = t.as_f64();
    return v;
}

}  // namespace

const CaseRecord& DatasetManifest::record(const std::string& id) const {
    for (const auto& c : cases)
        if (c.id == id) return c;
    throw ValidationError("case '" + id + "' not found in manifest");
}

const std::vector<std::string>& DatasetManifest::split_ids(const std::string& split) const {
    if (split == "train") return train_ids;
    if (split == "val") return val_ids;
    if (split == "test") return test_ids;
    throw ValidationError("unknown split '" + split + "'");
}

std::string DatasetManifest::to_json_string() const {
    json j;
    j["format"] = "dudospect-dataset-v1";
    j["master_seed"] = master_seed;
    j["dose_ratio"] = dose_ratio;
    j["total_counts"] = total_counts;
    j["mlem_iterations"] = mlem_iterations;
    j["geometry"] = json::parse(geometry.to_json_string());
    j["normalization"] = {{"mean_fd_total_counts", norm_mean_fd_counts},
                          {"per_bin_scale", norm_per_bin_scale}};
    j["splits"] = {{"train", train_ids}, {"val", val_ids}, {"test", test_ids}};
    json cj = json::array();
    for (const auto& c : cases)
        cj.push_back({{"id", c.id},
                      {"file", c.file},
                      {"crc32", c.crc32},
                      {"phantom_crc32", c.phantom_crc32},
                      {"sum_fd19", c.sum_fd19},
                      {"sum_fd9", c.sum_fd9},
                      {"sum_ld9", c.sum_ld9}});
    j["cases"] = std::move(cj);
    return j.dump(2);
}

DatasetManifest DatasetManifest::from_json_string(const std::string& text, std::string root_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("manifest parse failure: ") + e.what());
    }
    DatasetManifest m;
    m.root_dir = std::move(root_dir);
    m.master_seed = j.at("master_seed").get<uint64_t>();
    m.dose_ratio = j.at("dose_ratio").get<double>();
    m.total_counts = j.at("total_counts").get<double>();
    m.mlem_iterations = j.at("mlem_iterations").get<int>();
    m.geometry = ScannerGeometry::from_json_string(j.at("geometry").dump());
    m.norm_mean_fd_counts = j.at("normalization").at("mean_fd_total_counts").get<double>();
    m.norm_per_bin_scale = j.at("normalization").at("per_bin_scale").get<double>();
    m.train_ids = j.at("splits").at("train").get<std::vector<std::string>>();
    m.val_ids = j.at("splits").at("val").get<std::vector<std::string>>();
    m.test_ids = j.at("splits").at("test").get<std::vector<std::string>>();
    for (const auto& cj : j.at("cases")) {
        CaseRecord c;
        c.id = cj.at("id").get<std::string>();
        c.file = cj.at("file").get<std::string>();
        c.crc32 = cj.at("crc32").get<std::string>();
        c.phantom_crc32 = cj.at("phantom_crc32").get<std::string>();
        c.sum_fd19 = cj.at("sum_fd19").get<double>();
        c.sum_fd9 = cj.at("sum_fd9").get<double>();
        c.sum_ld9 = cj.at("sum_ld9").get<double>();
        m.cases.push_back(std::move(c));
    }
    return m;
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest '" + path + "'");
    out << to_json_string() << "\n";
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_string(ss.str(), fs::path(path).parent_path().string());
}

void DatasetManifest::verify_checksums() const {
    for (const auto& c : cases) {
        const std::string path = (fs::path(root_dir) / c.file).string();
        if (!fs::exists(path)) throw ValidationError("case blob missing: " + path);
        if (file_crc32_hex(path) != c.crc32)
            throw ValidationError("checksum mismatch for case blob: " + path);
    }
}

DatasetCase load_case(const DatasetManifest& manifest, const std::string& id) {
    const CaseRecord& rec = manifest.record(id);
    const std::string path = (fs::path(manifest.root_dir) / rec.file).string();
    const TensorArchive ar = TensorArchive::load(path);
    const std::string gid = manifest.geometry.id();
    DatasetCase c;
    c.case_id = id;
    c.p_fd_19a = get_projection(ar, "p_fd_19a", gid);
    c.p_fd_9a = get_projection(ar, "p_fd_9a", gid);
    c.p_ld_9a = get_projection(ar, "p_ld_9a", gid);
    c.i_fd_19a = get_volume(ar, "i_fd_19a", manifest.geometry.image_grid);
    c.i_ld_9a = get_volume(ar, "i_ld_9a", manifest.geometry.image_grid);
    c.phantom = get_volume(ar, "phantom", manifest.geometry.image_grid);
    c.dose_ratio = manifest.dose_ratio;
    return c;
}

DatasetManifest build_dataset(const DatasetConfig& config) {
    if (config.train_cases < 1 || config.val_cases < 1 || config.test_cases < 1)
        throw ConfigError("every split needs at least one case");
    if (!(config.dose_ratio > 0.0 && config.dose_ratio <= 1.0))
        throw ConfigError("dose_ratio must lie in (0, 1]");
    if (config.total_counts <= 0.0) throw ConfigError("total_counts must be positive");
    if (config.out_dir.empty()) throw ConfigError("dataset needs an output directory");

    const ScannerGeometry geometry = build_geometry(config.geometry);
    const SystemOperator op = make_system_operator(geometry);
    const AngleMask full = AngleMask::all_true(geometry.num_detectors());
    const AngleMask central = central_column_mask(geometry);
    const int n_total = config.train_cases + config.val_cases + config.test_cases;

    // seed-collision guard across the whole case list
    {
        std::set<uint64_t> seen;
        for (int i = 0; i < n_total; ++i)
            for (const char* stream : {"phantom", "emit", "thin"})
                if (!seen.insert(case_seed(config.master_seed, stream, i)).second)
                    throw ValidationError("case seed collision; choose a different master seed");
    }

    fs::create_directories(config.out_dir);
    DatasetManifest manifest;
    manifest.root_dir = config.out_dir;
    manifest.geometry = geometry;
    manifest.master_seed = config.master_seed;
    manifest.dose_ratio = config.dose_ratio;
    manifest.total_counts = config.total_counts;
    manifest.mlem_iterations = config.mlem_iterations;

    std::vector<std::string> written;
    try {
        double train_fd_sum = 0.0;
        for (int i = 0; i < n_total; ++i) {
            char idbuf[32];
            std::snprintf(idbuf, sizeof(idbuf), "case%04d", i);
            const std::string id = idbuf;

            PhantomSpec spec;
            spec.family = config.phantom_family;
            spec.myocardium_to_background_ratio = config.myo_bg_ratio;
            spec.rng_seed = case_seed(config.master_seed, "phantom", i);
            Rng defect_rng(derive_seed(spec.rng_seed, "defect"));
            if (config.phantom_family == PhantomFamily::cardiac_ellipsoid &&
                defect_rng.next_double() < config.defect_probability) {
                DefectSpec d;
                const double scale = std::min({geometry.image_grid.nx, geometry.image_grid.ny,
                                               geometry.image_grid.nz}) *
                                     geometry.image_grid.voxel_size_mm;
                d.position_mm = {defect_rng.next_uniform(-0.2, 0.2) * scale,
                                 defect_rng.next_uniform(-0.2, 0.2) * scale,
                                 defect_rng.next_uniform(-0.15, 0.1) * scale};
                d.radius_mm = defect_rng.next_uniform(0.04, 0.09) * scale;
                d.severity = defect_rng.next_uniform(0.5, 1.0);
                spec.defect = d;
            }

            const VolumeTensor phantom = generate_phantom(spec, geometry.image_grid);
            const ProjectionTensor clean = forward_project(op, phantom);
            const ProjectionTensor p_fd_19a = poisson_emit(
                clean, static_cast<uint64_t>(config.total_counts), case_seed(config.master_seed, "emit", i));
            const ProjectionTensor p_fd_9a = apply_angle_mask(p_fd_19a, central, MaskMode::zero_fill);
            const ProjectionTensor p_ld_19a =
                thin_counts(p_fd_19a, config.dose_ratio, case_seed(config.master_seed, "thin", i));
            const ProjectionTensor p_ld_9a = apply_angle_mask(p_ld_19a, central, MaskMode::zero_fill);

            MlemSettings fd_settings{config.mlem_iterations, full, 1e-8};
            MlemSettings ld_settings{config.mlem_iterations, central, 1e-8};
            const VolumeTensor i_fd_19a = mlem(op, p_fd_19a, fd_settings);
            const VolumeTensor i_ld_9a = mlem(op, p_ld_9a, ld_settings);

            TensorArchive ar;
            put_volume(ar, "phantom", phantom);
            put_projection(ar, "p_fd_19a", p_fd_19a);
            put_projection(ar, "p_fd_9a", p_fd_9a);
            put_projection(ar, "p_ld_9a", p_ld_9a);
            put_volume(ar, "i_fd_19a", i_fd_19a);
            put_volume(ar, "i_ld_9a", i_ld_9a);

            const std::string file = id + ".ntar";
            const std::string path = (fs::path(config.out_dir) / file).string();
            ar.save(path);
            written.push_back(path);

            CaseRecord rec;
            rec.id = id;
            rec.file = file;
            rec.crc32 = file_crc32_hex(path);
            {
                TensorArchive pa;
                put_volume(pa, "phantom", phantom);
                const auto bytes = pa.serialize();
                rec.phantom_crc32 = bytes_crc32_hex(bytes.data(), bytes.size());
            }
            rec.sum_fd19 = p_fd_19a.sum();
            rec.sum_fd9 = p_fd_9a.sum();
            rec.sum_ld9 = p_ld_9a.sum();
            manifest.cases.push_back(rec);

            if (i < config.train_cases) {
                manifest.train_ids.push_back(id);
                train_fd_sum += rec.sum_fd19;
            } else if (i < config.train_cases + config.val_cases) {
                manifest.val_ids.push_back(id);
            } else {
                manifest.test_ids.push_back(id);
            }
        }

        manifest.norm_mean_fd_counts = train_fd_sum / config.train_cases;
        const auto& d0 = geometry.detectors[0];
        const double n_bins = static_cast<double>(d0.bins_u) * d0.bins_v * geometry.num_detectors();
        manifest.norm_per_bin_scale = manifest.norm_mean_fd_counts / n_bins;
        manifest.save((fs::path(config.out_dir) / "manifest.json").string());
    } catch (...) {
        // partial-output cleanup: drop any blobs written so far
        for (const auto& path : written) {
            std::error_code ec;
            fs::remove(path, ec);
        }
        throw;
    }
    return manifest;
}

}  // namespace dudospect
