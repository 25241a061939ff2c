#include "fdi/runtime.hpp"

#include <cmath>
#include <fstream>

#include "fdi/error.hpp"
#include "fdi/matrix_io.hpp"

namespace fdi::runtime {

ResidualFilter::ResidualFilter(const design::FilterDesign& d, const Matrix& L) : d_N_(d.d_N), n_y_(L.cols()), a_(d.a) {
    const auto n_r = L.rows();
    if (d.Nbar.size() != (d.d_N + 1) * n_r) throw DimensionError("filter coefficients do not match L");
    if (a_.size() != d.d_N + 1 || a_(d.d_N) == 0.0) throw ConfigError("a(q) must have degree d_N");
    for (int i = 0; i <= d_N_; ++i) W_.push_back(d.coeff(i, n_r) * L);
    reset();
}

void ResidualFilter::reset() {
    y_hist_.assign(static_cast<std::size_t>(d_N_ + 1), Vector::Zero(n_y_));
    r_hist_.assign(static_cast<std::size_t>(d_N_), 0.0);
    k_ = 0;
}

double ResidualFilter::step(const Eigen::Ref<const Vector>& y) {
    if (y.size() != n_y_) {
        throw DimensionError("sample has " + std::to_string(y.size()) + " outputs, filter expects " +
                             std::to_string(n_y_));
    }
    const auto m = static_cast<long>(d_N_ + 1);
    y_hist_[static_cast<std::size_t>(k_ % m)] = y;
    if (k_ < d_N_) {
        // N(q) needs d_N + 1 samples; the filter input starts once the window is full.
        ++k_;
        return 0.0;
    }
    double acc = 0.0;
    // y[k - d_N + i] sits at slot (k - d_N + i) mod (d_N + 1).
    for (int i = 0; i <= d_N_; ++i) {
        const long t = k_ - d_N_ + i;
        acc += W_[static_cast<std::size_t>(i)].dot(y_hist_[static_cast<std::size_t>(t % m)]);
    }
    for (int i = 0; i < d_N_; ++i) {
        const long t = k_ - d_N_ + i;
        if (t >= 0) acc -= a_(i) * r_hist_[static_cast<std::size_t>(t % d_N_)];
    }
    const double r = acc / a_(d_N_);
    if (d_N_ > 0) r_hist_[static_cast<std::size_t>(k_ % d_N_)] = r;
    ++k_;
    return r;
}

Vector run_filter(const design::FilterDesign& design, const Matrix& L, const Matrix& Y) {
    ResidualFilter f(design, L);
    Vector r(Y.cols());
    for (Eigen::Index k = 0; k < Y.cols(); ++k) r(k) = f.step(Y.col(k));
    return r;
}

Vector residual_energy(const Vector& r, int window) {
    if (window < 1) throw ConfigError("energy window must be at least one sample");
    Vector e(r.size());
    for (Eigen::Index k = 0; k < r.size(); ++k) {
        const auto start = std::max<Eigen::Index>(0, k - window + 1);
        e(k) = std::sqrt(r.segment(start, k - start + 1).squaredNorm());
    }
    return e;
}

Detector calibrate_threshold(const design::FilterDesign& design, const std::vector<Matrix>& Qs, double margin,
                             int window) {
    if (Qs.empty()) throw ConfigError("threshold calibration needs at least one training instance");
    if (!(margin >= 0.0)) throw ConfigError("threshold margin must be nonnegative");
    Detector det;
    det.tau_star = std::sqrt(std::max(0.0, design::worst_case_cost(design.Nbar, Qs)));
    det.margin = margin;
    det.window = window;
    if (!(det.threshold() > 0.0)) throw ConfigError("detection threshold must be positive");
    return det;
}

DetectionReport detect(const Detector& det, const Vector& r, double Ts, int warmup) {
    DetectionReport rep;
    rep.r = r;
    rep.t.resize(r.size());
    for (Eigen::Index k = 0; k < r.size(); ++k) rep.t(k) = Ts * static_cast<double>(k);
    rep.energy = residual_energy(r, det.window);
    rep.threshold = det.threshold();
    rep.alarm.assign(static_cast<std::size_t>(r.size()), 0);
    for (Eigen::Index k = 0; k < r.size(); ++k) {
        if (k >= warmup) {
            rep.max_energy = std::max(rep.max_energy, rep.energy(k));
            if (rep.first_alarm < 0 && rep.energy(k) > rep.threshold) {
                rep.first_alarm = static_cast<int>(k);
                rep.first_alarm_time = rep.t(k);
            }
        }
        rep.alarm[static_cast<std::size_t>(k)] = rep.first_alarm >= 0 ? 1 : 0;
    }
    rep.final_energy = r.size() ? rep.energy(r.size() - 1) : 0.0;
    return rep;
}

void write_residual_trace(const std::filesystem::path& csv, const DetectionReport& rep) {
    std::ofstream os(csv);
    if (!os) throw ConfigError("cannot write " + csv.string());
    os << "t,r,energy,alarm\n";
    for (Eigen::Index k = 0; k < rep.r.size(); ++k) {
        os << io::format_double(rep.t(k)) << ',' << io::format_double(rep.r(k)) << ','
           << io::format_double(rep.energy(k)) << ',' << rep.alarm[static_cast<std::size_t>(k)] << '\n';
    }
}

}  // namespace fdi::runtime
