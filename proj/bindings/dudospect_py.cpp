// Python bindings for the main operations: geometry, projector, phantom
// simulation, MLEM, metrics, and the data-consistency fusion algebra.
// Tensor conventions match the C++ core: volumes are (nx, ny, nz) and
// projections (bins_u, bins_v, n_angles), C-ordered.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dudospect/dataset.hpp"
#include "dudospect/errors.hpp"
#include "dudospect/metrics.hpp"
#include "dudospect/mlem.hpp"
#include "dudospect/model/fusion.hpp"
#include "dudospect/phantom.hpp"
#include "dudospect/projector.hpp"

namespace py = pybind11;
using namespace dudospect;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

VolumeTensor volume_from_array(const Array& a, const GridSpec& grid) {
    if (a.ndim() != 3 || a.shape(0) != grid.nx || a.shape(1) != grid.ny || a.shape(2) != grid.nz)
        throw ShapeError("volume array does not match the geometry grid");
    VolumeTensor v = VolumeTensor::zeros(grid);
    std::copy(a.data(), a.data() + a.size(), v.data.begin());
    return v;
}

ProjectionTensor projection_from_array(const Array& a, const std::string& geometry_id = {}) {
    if (a.ndim() != 3) throw ShapeError("projection array must be 3D (u, v, angles)");
    ProjectionTensor p = ProjectionTensor::zeros(static_cast<int>(a.shape(0)),
                                                 static_cast<int>(a.shape(1)),
                                                 static_cast<int>(a.shape(2)), geometry_id);
    std::copy(a.data(), a.data() + a.size(), p.data.begin());
    return p;
}

py::array volume_to_array(const VolumeTensor& v) {
    py::array_t<double> out({v.grid.nx, v.grid.ny, v.grid.nz});
    std::copy(v.data.begin(), v.data.end(), out.mutable_data());
    return out;
}

py::array projection_to_array(const ProjectionTensor& p) {
    py::array_t<double> out({p.bins_u, p.bins_v, p.n_angles});
    std::copy(p.data.begin(), p.data.end(), out.mutable_data());
    return out;
}

AngleMask mask_from_list(const std::vector<bool>& flags) {
    AngleMask m;
    for (bool f : flags) m.flags.push_back(f ? 1 : 0);
    return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "multi-pinhole cardiac SPECT simulation, MLEM reconstruction and "
              "dual-domain fusion operations";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<ScannerGeometry>(m, "ScannerGeometry")
        .def_property_readonly("num_detectors", &ScannerGeometry::num_detectors)
        .def_property_readonly("radius_mm", [](const ScannerGeometry& g) { return g.radius_mm; })
        .def_property_readonly("grid_shape",
                               [](const ScannerGeometry& g) {
                                   return py::make_tuple(g.image_grid.nx, g.image_grid.ny,
                                                         g.image_grid.nz);
                               })
        .def_property_readonly("column_tags",
                               [](const ScannerGeometry& g) {
                                   std::vector<std::string> tags;
                                   for (const auto& d : g.detectors)
                                       tags.push_back(to_string(d.column_tag));
                                   return tags;
                               })
        .def("id", &ScannerGeometry::id)
        .def("to_json", &ScannerGeometry::to_json_string)
        .def_static("from_json", &ScannerGeometry::from_json_string)
        .def("save_json", &ScannerGeometry::save_json)
        .def_static("load_json", &ScannerGeometry::load_json);

    m.def("build_default_geometry",
          [](std::array<int, 3> image_size, std::array<int, 2> detector_bins) {
              return build_default_geometry(image_size, detector_bins);
          },
          py::arg("image_size") = std::array<int, 3>{32, 32, 32},
          py::arg("detector_bins") = std::array<int, 2>{32, 32});

    m.def("central_column_mask", [](const ScannerGeometry& g) {
        const AngleMask mask = central_column_mask(g);
        std::vector<bool> flags;
        for (auto f : mask.flags) flags.push_back(f != 0);
        return flags;
    });

    m.def("apply_angle_mask",
          [](const Array& p, const std::vector<bool>& mask, const std::string& mode) {
              const MaskMode mm = mode == "drop" ? MaskMode::drop : MaskMode::zero_fill;
              if (mode != "drop" && mode != "zero_fill")
                  throw ValidationError("mode must be 'zero_fill' or 'drop'");
              return projection_to_array(
                  apply_angle_mask(projection_from_array(p), mask_from_list(mask), mm));
          },
          py::arg("projection"), py::arg("mask"), py::arg("mode") = "zero_fill");

    m.def("forward_project",
          [](const ScannerGeometry& g, const Array& volume) {
              const auto op = make_system_operator(g);
              return projection_to_array(forward_project(op, volume_from_array(volume, g.image_grid)));
          },
          py::arg("geometry"), py::arg("volume"));

    m.def("back_project",
          [](const ScannerGeometry& g, const Array& projection) {
              const auto op = make_system_operator(g);
              return volume_to_array(back_project(op, projection_from_array(projection, g.id())));
          },
          py::arg("geometry"), py::arg("projection"));

    m.def("sensitivity_image",
          [](const ScannerGeometry& g, const std::vector<bool>& mask) {
              const auto op = make_system_operator(g);
              return volume_to_array(sensitivity_image(op, mask_from_list(mask)));
          },
          py::arg("geometry"), py::arg("mask"));

    m.def("mlem",
          [](const ScannerGeometry& g, const Array& counts, int iterations,
             const std::vector<bool>& mask) {
              const auto op = make_system_operator(g);
              MlemSettings settings;
              settings.iterations = iterations;
              settings.mask = mask.empty() ? AngleMask::all_true(g.num_detectors())
                                           : mask_from_list(mask);
              return volume_to_array(mlem(op, projection_from_array(counts, g.id()), settings));
          },
          py::arg("geometry"), py::arg("counts"), py::arg("iterations") = 30,
          py::arg("mask") = std::vector<bool>{});

    m.def("generate_phantom",
          [](const ScannerGeometry& g, const std::string& family, double ratio, uint64_t seed) {
              PhantomSpec spec;
              spec.family = phantom_family_from_string(family);
              spec.myocardium_to_background_ratio = ratio;
              spec.rng_seed = seed;
              return volume_to_array(generate_phantom(spec, g.image_grid));
          },
          py::arg("geometry"), py::arg("family") = "cardiac_ellipsoid", py::arg("ratio") = 4.0,
          py::arg("seed") = 0);

    m.def("poisson_emit",
          [](const Array& clean, uint64_t total_counts, uint64_t seed) {
              return projection_to_array(poisson_emit(projection_from_array(clean), total_counts, seed));
          },
          py::arg("clean"), py::arg("total_counts"), py::arg("seed"));

    m.def("thin_counts",
          [](const Array& counts, double dose_ratio, uint64_t seed) {
              return projection_to_array(thin_counts(projection_from_array(counts), dose_ratio, seed));
          },
          py::arg("counts"), py::arg("dose_ratio"), py::arg("seed"));

    m.def("nmse", [](const Array& pred, const Array& ref) {
        return nmse(std::span(pred.data(), static_cast<size_t>(pred.size())),
                    std::span(ref.data(), static_cast<size_t>(ref.size())));
    });
    m.def("nmae", [](const Array& pred, const Array& ref) {
        return nmae(std::span(pred.data(), static_cast<size_t>(pred.size())),
                    std::span(ref.data(), static_cast<size_t>(ref.size())));
    });
    m.def("psnr", [](const Array& pred, const Array& ref) {
        return psnr(std::span(pred.data(), static_cast<size_t>(pred.size())),
                    std::span(ref.data(), static_cast<size_t>(ref.size())));
    });
    m.def("ssim_volume", [](const Array& pred, const Array& ref) {
        if (pred.ndim() != 3 || ref.ndim() != 3) throw ShapeError("ssim_volume expects 3D arrays");
        return ssim_field(std::span(pred.data(), static_cast<size_t>(pred.size())),
                          std::span(ref.data(), static_cast<size_t>(ref.size())),
                          static_cast<int>(pred.shape(0)), static_cast<int>(pred.shape(1)),
                          static_cast<int>(pred.shape(2)));
    });

    m.def("paired_t_test", [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = paired_t_test(a, b);
        return py::make_tuple(r.t, r.p);
    });

    m.def("adc_fuse",
          [](const Array& aux, const Array& primary, const std::vector<bool>& delta,
             const Array& gamma, std::array<double, 3> recalibration) {
              return projection_to_array(adc_fuse(projection_from_array(aux),
                                                  projection_from_array(primary),
                                                  mask_from_list(delta),
                                                  projection_from_array(gamma), recalibration));
          },
          py::arg("aux"), py::arg("primary"), py::arg("delta"), py::arg("gamma"),
          py::arg("recalibration"));

    m.def("normal_dc_fuse",
          [](const Array& aux, const Array& primary, const std::vector<bool>& delta) {
              return projection_to_array(normal_dc_fuse(projection_from_array(aux),
                                                        projection_from_array(primary),
                                                        mask_from_list(delta)));
          },
          py::arg("aux"), py::arg("primary"), py::arg("delta"));

    m.def("build_dataset",
          [](const std::string& out_dir, int train, int val, int test, double dose_ratio,
             double total_counts, uint64_t seed, std::array<int, 3> image_size,
             std::array<int, 2> detector_bins, int mlem_iterations) {
              DatasetConfig cfg;
              cfg.geometry.image_size = image_size;
              cfg.geometry.detector_bins = detector_bins;
              cfg.train_cases = train;
              cfg.val_cases = val;
              cfg.test_cases = test;
              cfg.dose_ratio = dose_ratio;
              cfg.total_counts = total_counts;
              cfg.mlem_iterations = mlem_iterations;
              cfg.master_seed = seed;
              cfg.out_dir = out_dir;
              const auto manifest = build_dataset(cfg);
              return py::make_tuple(static_cast<int>(manifest.cases.size()),
                                    manifest.norm_per_bin_scale);
          },
          py::arg("out_dir"), py::arg("train") = 4, py::arg("val") = 2, py::arg("test") = 4,
          py::arg("dose_ratio") = 0.1, py::arg("total_counts") = 4e5, py::arg("seed") = 20260809,
          py::arg("image_size") = std::array<int, 3>{16, 16, 16},
          py::arg("detector_bins") = std::array<int, 2>{16, 16}, py::arg("mlem_iterations") = 10);
}
