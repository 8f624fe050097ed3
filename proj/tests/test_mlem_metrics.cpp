#include <doctest.h>

#include <cmath>

#include "dudospect/errors.hpp"
#include "dudospect/metrics.hpp"
#include "dudospect/mlem.hpp"
#include "dudospect/phantom.hpp"
#include "dudospect/rng.hpp"
#include "oracles.hpp"

using namespace dudospect;

namespace {

SystemOperator small_op() { return make_system_operator(build_default_geometry({16, 16, 16}, {16, 16})); }

MlemSettings settings(int iters, AngleMask mask) { return MlemSettings{iters, std::move(mask), 1e-8}; }

}  // namespace

TEST_CASE("mlem: zero data yields the zero volume after one iteration") {
    const auto op = small_op();
    const auto zero = ProjectionTensor::zeros(16, 16, 19);
    const auto x = mlem(op, zero, settings(1, AngleMask::all_true(19)));
    for (double v : x.data) CHECK(v == 0.0);
}

TEST_CASE("mlem: uniform initialization is a fixed point of its own data") {
    const auto op = small_op();
    const auto full = AngleMask::all_true(19);
    auto x0 = VolumeTensor::zeros(op.geometry.image_grid);
    std::fill(x0.data.begin(), x0.data.end(), 0.7);
    const auto y = forward_project(op, x0);
    const auto x = mlem(op, y, settings(3, full));
    const auto sens = sensitivity_image(op, full);
    const double sens_max = *std::max_element(sens.data.begin(), sens.data.end());
    for (size_t i = 0; i < x.data.size(); ++i) {
        if (sens.data[i] <= 1e-8 * sens_max) continue;  // floored voxels stay 0
        CHECK(x.data[i] == doctest::Approx(0.7).epsilon(1e-10));
    }
}

TEST_CASE("mlem: noiseless point source recovery passes the frozen regression bound") {
    const auto geometry = build_default_geometry({32, 32, 32}, {32, 32});
    const auto op = make_system_operator(geometry);
    auto truth = VolumeTensor::zeros(geometry.image_grid);
    truth.at(16, 16, 16) = 1.0;
    const auto y = forward_project(op, truth);
    const auto recon = mlem(op, y, settings(30, AngleMask::all_true(19)));
    const double err = nmse(recon, truth);
    // frozen regression bound; this implementation measures 1.6e-7
    CHECK(err < 1e-5);
    // and the reconstruction concentrates near the source
    double center_mass = 0.0;
    for (int dx = -2; dx <= 2; ++dx)
        for (int dy = -2; dy <= 2; ++dy)
            for (int dz = -2; dz <= 2; ++dz) center_mass += recon.at(16 + dx, 16 + dy, 16 + dz);
    CHECK(center_mass / recon.sum() > 0.5);
}

TEST_CASE("mlem: Poisson log-likelihood is non-decreasing, estimates stay nonnegative") {
    const auto op = small_op();
    const auto central = central_column_mask(op.geometry);
    for (uint64_t seed = 0; seed < 3; ++seed) {
        PhantomSpec spec;
        spec.family = PhantomFamily::cardiac_ellipsoid;
        spec.rng_seed = seed;
        const auto phantom = generate_phantom(spec, op.geometry.image_grid);
        const auto clean = forward_project(op, phantom);
        const auto y = apply_angle_mask(poisson_emit(clean, 200000, seed + 50), central,
                                        MaskMode::zero_fill);
        MlemDiagnostics diag;
        const auto x = mlem(op, y, settings(15, central), &diag);
        REQUIRE(diag.log_likelihood.size() == 15);
        for (size_t i = 1; i < diag.log_likelihood.size(); ++i)
            CHECK(diag.log_likelihood[i] >= diag.log_likelihood[i - 1] - 1e-9);
        for (double v : x.data) CHECK(v >= 0.0);
        // floored voxels are excluded from updates entirely
        const auto sens = sensitivity_image(op, central);
        const double smax = *std::max_element(sens.data.begin(), sens.data.end());
        for (size_t i = 0; i < x.data.size(); ++i)
            if (sens.data[i] <= 1e-8 * smax) CHECK(x.data[i] == 0.0);
    }
}

TEST_CASE("mlem rejects broken inputs") {
    const auto op = small_op();
    auto y = ProjectionTensor::zeros(16, 16, 19);
    y.data[0] = -1.0;
    CHECK_THROWS_AS(mlem(op, y, settings(1, AngleMask::all_true(19))), ValidationError);
    CHECK_THROWS_AS(mlem(op, ProjectionTensor::zeros(16, 16, 19), settings(0, AngleMask::all_true(19))),
                    ConfigError);
}

TEST_CASE("metric identities and simple algebra") {
    Rng rng(4);
    std::vector<double> ref(64);
    for (auto& v : ref) v = rng.next_uniform(0.1, 2.0);
    CHECK(nmse(ref, ref) == 0.0);
    CHECK(nmae(ref, ref) == 0.0);
    CHECK(psnr(ref, ref) == 200.0);

    std::vector<double> twice(ref);
    for (auto& v : twice) v *= 2.0;
    CHECK(nmse(twice, ref) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(nmae(twice, ref) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("metrics match direct-formula oracles on random pairs") {
    Rng rng(9);
    std::vector<double> pred(128), ref(128);
    for (auto& v : pred) v = rng.next_uniform(0.0, 3.0);
    for (auto& v : ref) v = rng.next_uniform(0.1, 3.0);
    CHECK(nmse(pred, ref) == doctest::Approx(oracles::nmse_formula(pred, ref)).epsilon(1e-12));
    CHECK(nmae(pred, ref) == doctest::Approx(oracles::nmae_formula(pred, ref)).epsilon(1e-12));
    CHECK(psnr(pred, ref) == doctest::Approx(oracles::psnr_formula(pred, ref)).epsilon(1e-12));
}

TEST_CASE("ssim matches the non-separable brute-force oracle") {
    Rng rng(10);
    const int n = 12;
    std::vector<double> pred(size_t(n * n * n)), ref(pred.size());
    for (auto& v : pred) v = rng.next_uniform(0.0, 1.0);
    for (auto& v : ref) v = rng.next_uniform(0.0, 1.0);
    const double mine = ssim_field(pred, ref, n, n, n);
    const double brute = oracles::ssim_bruteforce(pred, ref, n, n, n);
    CHECK(mine == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("ssim: identity, symmetry, and projection averaging") {
    Rng rng(12);
    const int n = 8;
    std::vector<double> a(size_t(n * n * n)), b(a.size());
    for (auto& v : a) v = rng.next_uniform(0.0, 1.0);
    for (auto& v : b) v = rng.next_uniform(0.0, 1.0);
    CHECK(ssim_field(a, a, n, n, n) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim_field(a, b, n, n, n) == doctest::Approx(ssim_field(b, a, n, n, n)).epsilon(1e-12));

    auto pa = ProjectionTensor::zeros(8, 8, 3);
    auto pb = ProjectionTensor::zeros(8, 8, 3);
    Rng rng2(13);
    for (auto& v : pa.data) v = rng2.next_double();
    for (auto& v : pb.data) v = rng2.next_double();
    const double sp = ssim_projection(pa, pb);
    CHECK(sp == doctest::Approx(ssim_projection(pb, pa)).epsilon(1e-12));
    CHECK(sp < 1.0);
}

TEST_CASE("metric scale invariance and noise response") {
    Rng rng(14);
    std::vector<double> pred(256), ref(256);
    for (auto& v : pred) v = rng.next_uniform(0.5, 1.5);
    for (auto& v : ref) v = rng.next_uniform(0.5, 1.5);
    const double base = nmse(pred, ref);
    std::vector<double> pred_c(pred), ref_c(ref);
    for (auto& v : pred_c) v *= 3.7;
    for (auto& v : ref_c) v *= 3.7;
    CHECK(nmse(pred_c, ref_c) == doctest::Approx(base).epsilon(1e-12));

    // psnr decreases statistically as independent noise grows
    int decreased = 0;
    for (uint64_t s = 0; s < 20; ++s) {
        Rng noise(s);
        std::vector<double> lo(ref), hi(ref);
        for (auto& v : lo) v += 0.01 * noise.next_normal();
        for (auto& v : hi) v += 0.2 * noise.next_normal();
        if (psnr(hi, ref) < psnr(lo, ref)) ++decreased;
    }
    CHECK(decreased >= 18);
}

TEST_CASE("metric validation errors") {
    std::vector<double> zeros(16, 0.0), ones(16, 1.0);
    CHECK_THROWS_AS(nmse(ones, zeros), ValidationError);
    std::vector<double> shorter(8, 1.0);
    CHECK_THROWS_AS(nmse(shorter, ones), ShapeError);
}

TEST_CASE("paired t-test matches the frozen scipy oracle") {
    const std::vector<double> a{2.1, 2.5, 3.0, 2.8, 2.2, 2.9, 3.1, 2.4, 2.7, 2.6};
    const std::vector<double> b{2.0, 2.6, 2.8, 2.9, 2.0, 2.7, 3.3, 2.1, 2.5, 2.4};
    const auto r = paired_t_test(a, b);
    // frozen from scipy.stats.ttest_rel
    CHECK(r.t == doctest::Approx(1.860521018838128).epsilon(1e-9));
    CHECK(r.p == doctest::Approx(0.095733909471259).epsilon(1e-6));

    const auto swapped = paired_t_test(b, a);
    CHECK(swapped.t == doctest::Approx(-r.t).epsilon(1e-12));
    CHECK(swapped.p == doctest::Approx(r.p).epsilon(1e-12));
}

TEST_CASE("paired t-test rejects degenerate input") {
    const std::vector<double> a{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(paired_t_test(a, a), DegenerateInputError);
    const std::vector<double> single{1.0};
    CHECK_THROWS_AS(paired_t_test(single, single), ValidationError);
}

TEST_CASE("metric report CSV and JSON round-trip") {
    MetricReport r;
    r.label = "demo";
    r.case_ids = {"c0", "c1"};
    r.nmse_values = {0.02, 0.03};
    r.nmae_values = {0.1, 0.12};
    r.ssim_values = {0.95, 0.93};
    r.psnr_values = {31.0, 30.0};
    const auto csv = r.to_csv();
    CHECK(csv.find("case_id") == 0);
    CHECK(csv.find("mean,") != std::string::npos);
    const auto back = MetricReport::from_json_string(r.to_json_string());
    CHECK(back.nmse_values == r.nmse_values);
    CHECK(back.label == r.label);
    const auto s = back.summary();
    CHECK(s.nmse_mean == doctest::Approx(0.025));
}
