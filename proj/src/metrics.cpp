#include "dudospect/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "dudospect/errors.hpp"

namespace dudospect {

using nlohmann::json;

namespace {

void check_pair(std::span<const double> pred, std::span<const double> ref) {
    if (pred.size() != ref.size()) throw ShapeError("metric inputs have different sizes");
    if (ref.empty()) throw ValidationError("metric inputs are empty");
    bool any_nonzero = false;
    for (double v : ref)
        if (v != 0.0) {
            any_nonzero = true;
            break;
        }
    if (!any_nonzero) throw ValidationError("metric reference is identically zero");
}

}  // namespace

double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double nmse(std::span<const double> pred, std::span<const double> ref) {
    check_pair(pred, ref);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - ref[i];
        num += d * d;
        den += ref[i] * ref[i];
    }
    return num / den;
}

double nmae(std::span<const double> pred, std::span<const double> ref) {
    check_pair(pred, ref);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        num += std::abs(pred[i] - ref[i]);
        den += std::abs(ref[i]);
    }
    return num / den;
}

double psnr(std::span<const double> pred, std::span<const double> ref) {
    check_pair(pred, ref);
    double peak = -std::numeric_limits<double>::infinity();
    double sq = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        peak = std::max(peak, ref[i]);
        const double d = pred[i] - ref[i];
        sq += d * d;
    }
    const double rmse = std::sqrt(sq / static_cast<double>(pred.size()));
    if (rmse == 0.0 || peak <= 0.0) return 200.0;
    return std::min(200.0, 20.0 * std::log10(peak / rmse));
}

namespace {

// 1D Gaussian smoothing along the fastest-varying axis of a (outer, n)
// view, window truncated and renormalized at the boundaries.
void gauss_1d(const std::vector<double>& in, std::vector<double>& out, int64_t outer, int64_t n,
              int64_t stride_outer, int64_t stride_n, const std::vector<double>& kernel) {
    const int half = static_cast<int>(kernel.size() / 2);
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t i = 0; i < n; ++i) {
            double acc = 0.0, wsum = 0.0;
            const int lo = static_cast<int>(std::max<int64_t>(-half, -i));
            const int hi = static_cast<int>(std::min<int64_t>(half, n - 1 - i));
            for (int k = lo; k <= hi; ++k) {
                const double w = kernel[static_cast<size_t>(k + half)];
                acc += w * in[static_cast<size_t>(o * stride_outer + (i + k) * stride_n)];
                wsum += w;
            }
            out[static_cast<size_t>(o * stride_outer + i * stride_n)] = acc / wsum;
        }
    }
}

// Separable Gaussian smoothing of a C-ordered (nx, ny, nz) field.
std::vector<double> gauss_3d(const std::vector<double>& f, int nx, int ny, int nz,
                             const std::vector<double>& kernel) {
    std::vector<double> a(f), b(f.size());
    // along z (fastest axis)
    gauss_1d(a, b, int64_t(nx) * ny, nz, nz, 1, kernel);
    // along y: view as (nx, ny, nz); smooth the middle axis per x-slab
    for (int x = 0; x < nx; ++x) {
        for (int z = 0; z < nz; ++z) {
            // treat column (y varies) as outer=1 strided vector
            const int64_t base = int64_t(x) * ny * nz + z;
            const int half = static_cast<int>(kernel.size() / 2);
            for (int y = 0; y < ny; ++y) {
                double acc = 0.0, wsum = 0.0;
                const int lo = std::max(-half, -y);
                const int hi = std::min(half, ny - 1 - y);
                for (int k = lo; k <= hi; ++k) {
                    const double w = kernel[static_cast<size_t>(k + half)];
                    acc += w * b[static_cast<size_t>(base + int64_t(y + k) * nz)];
                    wsum += w;
                }
                a[static_cast<size_t>(base + int64_t(y) * nz)] = acc / wsum;
            }
        }
    }
    // along x
    std::vector<double> c(f.size());
    for (int y = 0; y < ny; ++y)
        for (int z = 0; z < nz; ++z) {
            const int64_t base = int64_t(y) * nz + z;
            const int half = static_cast<int>(kernel.size() / 2);
            for (int x = 0; x < nx; ++x) {
                double acc = 0.0, wsum = 0.0;
                const int lo = std::max(-half, -x);
                const int hi = std::min(half, nx - 1 - x);
                for (int k = lo; k <= hi; ++k) {
                    const double w = kernel[static_cast<size_t>(k + half)];
                    acc += w * a[static_cast<size_t>(base + int64_t(x + k) * ny * nz)];
                    wsum += w;
                }
                c[static_cast<size_t>(base + int64_t(x) * ny * nz)] = acc / wsum;
            }
        }
    return c;
}

std::vector<double> gaussian_kernel(const SsimOptions& opt) {
    std::vector<double> k(static_cast<size_t>(opt.window));
    const int half = opt.window / 2;
    double sum = 0.0;
    for (int i = 0; i < opt.window; ++i) {
        const double x = i - half;
        k[static_cast<size_t>(i)] = std::exp(-0.5 * x * x / (opt.sigma * opt.sigma));
        sum += k[static_cast<size_t>(i)];
    }
    for (auto& v : k) v /= sum;
    return k;
}

}  // namespace

double ssim_field(std::span<const double> pred, std::span<const double> ref, int nx, int ny, int nz,
                  const SsimOptions& opt) {
    check_pair(pred, ref);
    if (static_cast<int64_t>(pred.size()) != int64_t(nx) * ny * nz)
        throw ShapeError("ssim: field size does not match dimensions");

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : pred) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : ref) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi - lo;
    if (range == 0.0) return 1.0;  // both fields constant and equal-valued windows
    const double c1 = (opt.k1 * range) * (opt.k1 * range);
    const double c2 = (opt.k2 * range) * (opt.k2 * range);

    const auto kernel = gaussian_kernel(opt);
    const size_t n = pred.size();
    std::vector<double> x(pred.begin(), pred.end());
    std::vector<double> y(ref.begin(), ref.end());
    std::vector<double> xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mu_x = gauss_3d(x, nx, ny, nz, kernel);
    const auto mu_y = gauss_3d(y, nx, ny, nz, kernel);
    const auto m_xx = gauss_3d(xx, nx, ny, nz, kernel);
    const auto m_yy = gauss_3d(yy, nx, ny, nz, kernel);
    const auto m_xy = gauss_3d(xy, nx, ny, nz, kernel);

    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double vx = std::max(0.0, m_xx[i] - mu_x[i] * mu_x[i]);
        const double vy = std::max(0.0, m_yy[i] - mu_y[i] * mu_y[i]);
        const double cov = m_xy[i] - mu_x[i] * mu_y[i];
        const double num = (2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * cov + c2);
        const double den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (vx + vy + c2);
        acc += num / den;
    }
    return acc / static_cast<double>(n);
}

double ssim_volume(const VolumeTensor& pred, const VolumeTensor& ref, const SsimOptions& opt) {
    if (!(pred.grid == ref.grid)) throw ShapeError("ssim: volume grids differ");
    return ssim_field(pred.data, ref.data, pred.grid.nx, pred.grid.ny, pred.grid.nz, opt);
}

double ssim_projection(const ProjectionTensor& pred, const ProjectionTensor& ref,
                       const SsimOptions& opt) {
    if (!pred.same_shape(ref)) throw ShapeError("ssim: projection shapes differ");
    double acc = 0.0;
    std::vector<double> a(static_cast<size_t>(pred.bins_u) * pred.bins_v);
    std::vector<double> b(a.size());
    for (int ang = 0; ang < pred.n_angles; ++ang) {
        for (int iu = 0; iu < pred.bins_u; ++iu)
            for (int iv = 0; iv < pred.bins_v; ++iv) {
                a[static_cast<size_t>(iu) * pred.bins_v + iv] = pred.at(iu, iv, ang);
                b[static_cast<size_t>(iu) * pred.bins_v + iv] = ref.at(iu, iv, ang);
            }
        // 2D field: nz = 1
        acc += ssim_field(a, b, pred.bins_u, pred.bins_v, 1, opt);
    }
    return acc / pred.n_angles;
}

double nmse(const VolumeTensor& pred, const VolumeTensor& ref) { return nmse(std::span(pred.data), std::span(ref.data)); }
double nmse(const ProjectionTensor& pred, const ProjectionTensor& ref) { return nmse(std::span(pred.data), std::span(ref.data)); }
double nmae(const VolumeTensor& pred, const VolumeTensor& ref) { return nmae(std::span(pred.data), std::span(ref.data)); }
double nmae(const ProjectionTensor& pred, const ProjectionTensor& ref) { return nmae(std::span(pred.data), std::span(ref.data)); }
double psnr(const VolumeTensor& pred, const VolumeTensor& ref) { return psnr(std::span(pred.data), std::span(ref.data)); }
double psnr(const ProjectionTensor& pred, const ProjectionTensor& ref) { return psnr(std::span(pred.data), std::span(ref.data)); }

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("paired t-test requires equal lengths");
    if (a.size() < 2) throw ValidationError("paired t-test requires at least 2 pairs");
    std::vector<double> d(a.size());
    for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double md = mean(d);
    const double sd = sample_std(d);
    if (sd == 0.0) throw DegenerateInputError("paired t-test: zero-variance differences");
    const double n = static_cast<double>(a.size());
    const double t = md / (sd / std::sqrt(n));
    boost::math::students_t dist(n - 1.0);
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    return {t, p};
}

MetricReport::Summary MetricReport::summary() const {
    Summary s;
    s.nmse_mean = mean(nmse_values);
    s.nmse_std = sample_std(nmse_values);
    s.nmae_mean = mean(nmae_values);
    s.nmae_std = sample_std(nmae_values);
    s.ssim_mean = mean(ssim_values);
    s.ssim_std = sample_std(ssim_values);
    s.psnr_mean = mean(psnr_values);
    s.psnr_std = sample_std(psnr_values);
    return s;
}

namespace {
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}
}  // namespace

std::string MetricReport::to_csv() const {
    if (case_ids.size() != nmse_values.size() || nmse_values.size() != nmae_values.size() ||
        nmae_values.size() != ssim_values.size() || ssim_values.size() != psnr_values.size())
        throw ValidationError("metric report columns have unequal lengths");
    std::ostringstream out;
    out << "case_id,nmse_percent,nmae_percent,ssim,psnr_db\n";
    for (size_t i = 0; i < case_ids.size(); ++i) {
        out << case_ids[i] << ',' << fmt(100.0 * nmse_values[i]) << ',' << fmt(100.0 * nmae_values[i])
            << ',' << fmt(ssim_values[i]) << ',' << fmt(psnr_values[i]) << '\n';
    }
    const Summary s = summary();
    out << "mean," << fmt(100.0 * s.nmse_mean) << ',' << fmt(100.0 * s.nmae_mean) << ','
        << fmt(s.ssim_mean) << ',' << fmt(s.psnr_mean) << '\n';
    out << "std," << fmt(100.0 * s.nmse_std) << ',' << fmt(100.0 * s.nmae_std) << ','
        << fmt(s.ssim_std) << ',' << fmt(s.psnr_std) << '\n';
    return out.str();
}

std::string MetricReport::to_json_string() const {
    json j;
    j["label"] = label;
    j["case_ids"] = case_ids;
    j["nmse"] = nmse_values;
    j["nmae"] = nmae_values;
    j["ssim"] = ssim_values;
    j["psnr"] = psnr_values;
    const Summary s = summary();
    j["summary"] = {{"nmse_mean", s.nmse_mean}, {"nmse_std", s.nmse_std},
                    {"nmae_mean", s.nmae_mean}, {"nmae_std", s.nmae_std},
                    {"ssim_mean", s.ssim_mean}, {"ssim_std", s.ssim_std},
                    {"psnr_mean", s.psnr_mean}, {"psnr_std", s.psnr_std}};
    return j.dump(2);
}

MetricReport MetricReport::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("metric report parse failure: ") + e.what());
    }
    MetricReport r;
    r.label = j.at("label").get<std::string>();
    r.case_ids = j.at("case_ids").get<std::vector<std::string>>();
    r.nmse_values = j.at("nmse").get<std::vector<double>>();
    r.nmae_values = j.at("nmae").get<std::vector<double>>();
    r.ssim_values = j.at("ssim").get<std::vector<double>>();
    r.psnr_values = j.at("psnr").get<std::vector<double>>();
    return r;
}

void MetricReport::save(const std::string& csv_path, const std::string& json_path) const {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw IoError("cannot open '" + csv_path + "'");
    csv << to_csv();
    std::ofstream js(json_path, std::ios::binary);
    if (!js) throw IoError("cannot open '" + json_path + "'");
    js << to_json_string() << "\n";
}

}  // namespace dudospect
