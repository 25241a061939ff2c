#pragma once

#include <filesystem>
#include <vector>

#include "fdi/design.hpp"

namespace fdi::runtime {

/// Causal realization of r = a(q)^{-1} N(q) L y with zero initial conditions:
///   r[k] = (sum_i N_i L y[k - d_N + i] - sum_{i<d_N} a_i r[k - d_N + i]) / a_{d_N}
/// for k >= d_N, and r[k] = 0 before the first full window. Over a horizon of T
/// samples the energy equals Nbar Q Nbar^T for the signature Y.
class ResidualFilter {
   public:
    ResidualFilter(const design::FilterDesign& design, const Matrix& L);

    double step(const Eigen::Ref<const Vector>& y);
    void reset();

    long samples() const { return k_; }
    /// True while fewer than d_N + 1 samples have been seen.
    bool warming_up() const { return k_ <= d_N_; }
    Eigen::Index n_y() const { return n_y_; }

   private:
    int d_N_ = 0;
    Eigen::Index n_y_ = 0;
    std::vector<RowVector> W_;  // N_i L
    Vector a_;
    std::vector<Vector> y_hist_;   // ring of the last d_N + 1 samples
    std::vector<double> r_hist_;   // ring of the last d_N residuals
    long k_ = 0;
};

/// Streams the columns of Y through a fresh filter.
Vector run_filter(const design::FilterDesign& design, const Matrix& L, const Matrix& Y);

/// sqrt of the sum of r^2 over the last `window` samples, zero-padded at the start.
Vector residual_energy(const Vector& r, int window);

struct Detector {
    double tau_star = 0.0;
    double margin = 0.0;
    int window = 20;
    double threshold() const { return tau_star + margin; }
};

/// tau* = sqrt(max_i Nbar Q_i Nbar^T); throws ConfigError on an empty list or negative margin.
Detector calibrate_threshold(const design::FilterDesign& design, const std::vector<Matrix>& Qs, double margin,
                             int window = 20);

struct DetectionReport {
    Vector t;
    Vector r;
    Vector energy;
    std::vector<int> alarm;  // latched: 1 from the first crossing on
    int first_alarm = -1;    // sample index, -1 without alarm
    double first_alarm_time = -1.0;
    double max_energy = 0.0;
    double final_energy = 0.0;
    double threshold = 0.0;

    bool detected() const { return first_alarm >= 0; }
};

/// Windowed energy against the threshold, evaluated at every sample after the
/// first `warmup` ones; the alarm latches at the first crossing.
DetectionReport detect(const Detector& det, const Vector& r, double Ts, int warmup);

/// CSV "t,r,energy,alarm".
void write_residual_trace(const std::filesystem::path& csv, const DetectionReport& rep);

}  // namespace fdi::runtime
