#pragma once

#include "opcal/gridselect.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace opcal::simlab {

/// |Cauchy| calibration scores, a finite deployment window, three index-selection rules.
struct CoverageStudySpec {
    std::vector<long> n_cal_grid = {50, 75, 100, 150, 200, 250, 300, 500};
    std::vector<Method> methods = {Method::Nominal, Method::SSBC, Method::DKWM};
    double alpha_star = 0.10;
    double delta = 0.10;
    long m_infer = 100;
    long reps = 100000;
    std::uint64_t seed = 20240601;
    /// Regime used by SSBC to pick u.
    Regime selection_regime = Regime::finite(100);
};

struct CoverageRow {
    long n = 0;
    Method method = Method::Nominal;
    long u = 0;
    double alpha_grid = 0.0;
    long violations = 0;
    double obs = 0.0;
    double obs_se = 0.0;
    double beta_theory = 0.0;
    double bb_theory = 0.0;
    std::optional<double> alpha_cont;
    bool infeasible = false;
};

std::vector<CoverageRow> run_coverage_study(const CoverageStudySpec& spec);
void write_coverage_csv(std::ostream& out, const std::vector<CoverageRow>& rows);

/// One synthetic score geometry: Y ~ Bernoulli(p_class), P1 | Y=y ~ Beta(shape_y).
struct EnvelopeConfig {
    double p_class = 0.5;
    double a1 = 4.0;
    double b1 = 3.0;
    double a0 = 2.0;
    double b0 = 7.0;

    std::string label() const;
};

struct EnvelopeStudySpec {
    std::vector<EnvelopeConfig> configs = {{0.10, 4, 3, 2, 7}, {0.10, 9, 3, 2, 7}, {0.50, 4, 3, 2, 7}, {0.50, 9, 3, 2, 7}};
    long N = 500;
    long m = 100;
    double level = 0.95;
    double alpha = 0.10;
    double delta = 0.10;
    std::vector<double> infl_levels = {1.0, 2.0};
    std::vector<std::string> kpis = {"singleton", "wrong_singleton"};
    long reps = 1000;
    std::uint64_t seed = 20240602;
};

struct EnvelopeKpiReport {
    std::string config;
    std::string kpi;
    long reps_used = 0;
    long reps_skipped = 0;
    /// two-sample envelope contains the realized future-window count
    long contained = 0;
    /// LOO (infl = 1) point estimate lies inside the two-sample envelope
    long loo_inside = 0;
    /// every successive infl level's interval contains the previous one
    long nested = 0;
    double mean_center_offset = 0.0; ///< LOO point minus two-sample point, counts
    double mean_two_sample_width = 0.0;
    std::vector<double> mean_loo_width; ///< per infl level

    double contained_freq() const;
    double contained_se() const;
    double loo_inside_freq() const;
    double nested_freq() const;
};

std::vector<EnvelopeKpiReport> run_envelope_study(const EnvelopeStudySpec& spec);
void write_envelope_csv(std::ostream& out, const std::vector<EnvelopeKpiReport>& rows);

/// Samples one labeled draw set from the synthetic model (scores s0 = p1, s1 = 1 - p1).
struct SyntheticDraw {
    std::vector<double> p1;
    std::vector<int> labels;
};
SyntheticDraw draw_synthetic(const EnvelopeConfig& cfg, long n, std::uint64_t seed, std::uint64_t stream);

struct CouplingEstimate {
    long n = 0;
    long k = 0;
    long reps = 0;
    double estimate = 0.0;
    double se = 0.0;
    double closed_form = 0.0;
};

/// k (k - n) / (n^2 (n - 1))
double coupling_closed_form(long n, long k);

/// Monte Carlo estimate of Cov(I_1, I_2 | tau = S_(k)).
CouplingEstimate run_coupling_check(long n, long k, long reps, std::uint64_t seed = 7);

/// Exact covariance by enumerating every rank ordering (n <= 9).
double coupling_exhaustive(long n, long k);

} // namespace opcal::simlab
