#include "opcal/simlab.hpp"

#include "opcal/audit.hpp"
#include "opcal/conformal.hpp"
#include "opcal/errors.hpp"
#include "opcal/exactdist.hpp"
#include "opcal/planner.hpp"
#include "opcal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace opcal::simlab {

namespace {

// |t_1| draw: tan of a uniform half-angle.
double abs_cauchy(Rng& rng) { return std::tan(0.5 * std::numbers::pi * rng.uniform()); }

double beta_draw(Rng& rng, double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
}

std::uint64_t stream_id(std::uint64_t group, std::uint64_t rep) { return (group << 32) ^ rep; }

struct ConfigKpiAcc {
    long used = 0;
    long contained = 0;
    long loo_inside = 0;
    long nested = 0;
    double center_offset = 0.0;
    double two_sample_width = 0.0;
    std::vector<double> loo_width;
};

} // namespace

std::vector<CoverageRow> run_coverage_study(const CoverageStudySpec& spec) {
    if (spec.reps < 1) throw DomainError("coverage study needs reps >= 1");
    if (spec.m_infer < 1) throw DomainError("deployment window must be >= 1");
    std::vector<CoverageRow> rows;
    const long x_star = gridselect::window_success_threshold(spec.alpha_star, spec.m_infer);

    for (std::size_t gi = 0; gi < spec.n_cal_grid.size(); ++gi) {
        const long n = spec.n_cal_grid[gi];
        const std::size_t first = rows.size();
        std::vector<long> ks;
        for (Method method : spec.methods) {
            CoverageRow row;
            row.n = n;
            row.method = method;
            const CoverageRequest req{spec.alpha_star, spec.delta, n,
                                      method == Method::SSBC ? spec.selection_regime : Regime::infinite()};
            const auto sel = gridselect::select_index(method, req);
            if (!sel) {
                row.infeasible = true;
                rows.push_back(row);
                ks.push_back(0);
                continue;
            }
            row.u = sel->u;
            row.alpha_grid = sel->alpha_grid();
            row.alpha_cont = sel->alpha_cont;
            row.beta_theory = gridselect::violation_probability(spec.alpha_star, n, sel->u, Regime::infinite());
            row.bb_theory =
                gridselect::violation_probability(spec.alpha_star, n, sel->u, Regime::finite(spec.m_infer));
            rows.push_back(row);
            ks.push_back(sel->k);
        }

        std::vector<double> scores(static_cast<std::size_t>(n));
        std::vector<double> taus(ks.size());
        for (long rep = 0; rep < spec.reps; ++rep) {
            Rng rng(spec.seed, stream_id(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep)));
            for (auto& s : scores) s = abs_cauchy(rng);
            std::sort(scores.begin(), scores.end());
            for (std::size_t j = 0; j < ks.size(); ++j) {
                taus[j] = ks[j] > 0 ? scores[static_cast<std::size_t>(ks[j] - 1)] : 0.0;
            }
            std::vector<long> covered(ks.size(), 0);
            for (long t = 0; t < spec.m_infer; ++t) {
                const double s = abs_cauchy(rng);
                for (std::size_t j = 0; j < ks.size(); ++j) covered[j] += (s <= taus[j]) ? 1 : 0;
            }
            for (std::size_t j = 0; j < ks.size(); ++j) {
                if (ks[j] > 0 && covered[j] < x_star) ++rows[first + j].violations;
            }
        }
        for (std::size_t j = first; j < rows.size(); ++j) {
            auto& r = rows[j];
            if (r.infeasible) continue;
            r.obs = static_cast<double>(r.violations) / static_cast<double>(spec.reps);
            r.obs_se = std::sqrt(r.obs * (1.0 - r.obs) / static_cast<double>(spec.reps));
        }
    }
    return rows;
}

void write_coverage_csv(std::ostream& out, const std::vector<CoverageRow>& rows) {
    using planner::format_double;
    out << "n_cal,method,u,alpha_grid,obs,obs_se,beta_theory,bb_theory,alpha_cont\n";
    for (const auto& r : rows) {
        out << r.n << ',' << to_string(r.method) << ',';
        if (r.infeasible) {
            out << "infeasible,,,,,,\n";
            continue;
        }
        out << r.u << ',' << format_double(r.alpha_grid) << ',' << format_double(r.obs) << ','
            << format_double(r.obs_se) << ',' << format_double(r.beta_theory) << ',' << format_double(r.bb_theory)
            << ',' << (r.alpha_cont ? format_double(*r.alpha_cont) : "") << '\n';
    }
}

std::string EnvelopeConfig::label() const {
    std::ostringstream os;
    os << "p=" << p_class << ";beta1=(" << a1 << "," << b1 << ");beta0=(" << a0 << "," << b0 << ")";
    return os.str();
}

SyntheticDraw draw_synthetic(const EnvelopeConfig& cfg, long n, std::uint64_t seed, std::uint64_t stream) {
    Rng rng(seed, stream);
    SyntheticDraw d;
    d.p1.reserve(static_cast<std::size_t>(n));
    d.labels.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const int y = rng.uniform() < cfg.p_class ? 1 : 0;
        d.labels.push_back(y);
        d.p1.push_back(y == 1 ? beta_draw(rng, cfg.a1, cfg.b1) : beta_draw(rng, cfg.a0, cfg.b0));
    }
    return d;
}

double EnvelopeKpiReport::contained_freq() const {
    return reps_used > 0 ? static_cast<double>(contained) / static_cast<double>(reps_used) : 0.0;
}

double EnvelopeKpiReport::contained_se() const {
    if (reps_used == 0) return 0.0;
    const double p = contained_freq();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(reps_used));
}

double EnvelopeKpiReport::loo_inside_freq() const {
    return reps_used > 0 ? static_cast<double>(loo_inside) / static_cast<double>(reps_used) : 0.0;
}

double EnvelopeKpiReport::nested_freq() const {
    return reps_used > 0 ? static_cast<double>(nested) / static_cast<double>(reps_used) : 0.0;
}

std::vector<EnvelopeKpiReport> run_envelope_study(const EnvelopeStudySpec& spec) {
    if (spec.reps < 1) throw DomainError("envelope study needs reps >= 1");
    if (spec.infl_levels.empty() || spec.infl_levels.front() != 1.0) {
        throw DomainError("inflation levels must start at 1");
    }
    const Policy policy = Policy::set_inclusion();
    std::vector<KpiMask> masks;
    for (const auto& name : spec.kpis) masks.push_back(audit::mask_by_name(policy, name));

    std::vector<EnvelopeKpiReport> reports;
    for (std::size_t ci = 0; ci < spec.configs.size(); ++ci) {
        const auto& cfg = spec.configs[ci];
        std::vector<ConfigKpiAcc> acc(masks.size());
        for (auto& a : acc) a.loo_width.assign(spec.infl_levels.size(), 0.0);
        long skipped = 0;

        for (long rep = 0; rep < spec.reps; ++rep) {
            const std::uint64_t base = stream_id(ci + 1, static_cast<std::uint64_t>(rep)) * 4;
            const auto d1 = draw_synthetic(cfg, spec.N, spec.seed, base);
            const auto d2 = draw_synthetic(cfg, spec.N, spec.seed, base + 1);
            const auto future = draw_synthetic(cfg, spec.m, spec.seed, base + 2);
            const ScoreSample cal = sample_from_probabilities(d1.p1, d1.labels);
            const ScoreSample aud = sample_from_probabilities(d2.p1, d2.labels);
            const ScoreSample win = sample_from_probabilities(future.p1, future.labels);

            std::optional<conformal::Calibration> calib;
            RegionLabelTable loo;
            try {
                calib = conformal::calibrate(cal, {spec.alpha, spec.delta, spec.alpha, spec.delta,
                                                   Regime::finite(spec.m), Method::SSBC});
                if (calib) loo = audit::loo_table(cal, calib->sel0, calib->sel1);
            } catch (const InsufficientClassData&) {
                calib.reset();
            }
            if (!calib) {
                ++skipped;
                continue;
            }
            const RegionLabelTable audit_table = audit::tabulate(aud, calib->thresholds);
            const RegionLabelTable window_table = audit::tabulate(win, calib->thresholds);

            for (std::size_t k = 0; k < masks.size(); ++k) {
                auto& a = acc[k];
                ++a.used;
                const long audit_count = audit::project(audit_table, masks[k]).count;
                const auto two = audit::envelope_two_sample(audit_count, audit_table.n_total, spec.m, spec.level);
                const long realized = audit::project(window_table, masks[k]).count;
                a.contained += two.contains(realized) ? 1 : 0;
                a.two_sample_width += static_cast<double>(two.hi - two.lo);

                const LooSummary summary{masks[k].name, audit::project(loo, masks[k]).count, loo.n_total, {}};
                const double loo_point = static_cast<double>(spec.m) * static_cast<double>(summary.n_loo) /
                                         static_cast<double>(summary.n);
                a.loo_inside += (loo_point >= static_cast<double>(two.lo) && loo_point <= static_cast<double>(two.hi)) ? 1 : 0;
                a.center_offset += loo_point - two.point;

                bool nested = true;
                std::optional<PredictiveEnvelope> previous;
                for (std::size_t li = 0; li < spec.infl_levels.size(); ++li) {
                    const auto env = audit::envelope_loo(summary, spec.m, spec.level, spec.infl_levels[li]);
                    a.loo_width[li] += static_cast<double>(env.hi - env.lo);
                    if (previous && !(env.lo <= previous->lo && env.hi >= previous->hi)) nested = false;
                    previous = env;
                }
                a.nested += nested ? 1 : 0;
            }
        }

        for (std::size_t k = 0; k < masks.size(); ++k) {
            const auto& a = acc[k];
            EnvelopeKpiReport r;
            r.config = cfg.label();
            r.kpi = masks[k].name;
            r.reps_used = a.used;
            r.reps_skipped = skipped;
            r.contained = a.contained;
            r.loo_inside = a.loo_inside;
            r.nested = a.nested;
            const double used = a.used > 0 ? static_cast<double>(a.used) : 1.0;
            r.mean_center_offset = a.center_offset / used;
            r.mean_two_sample_width = a.two_sample_width / used;
            for (double w : a.loo_width) r.mean_loo_width.push_back(w / used);
            reports.push_back(std::move(r));
        }
    }
    return reports;
}

void write_envelope_csv(std::ostream& out, const std::vector<EnvelopeKpiReport>& rows) {
    using planner::format_double;
    out << "config,kpi,reps_used,reps_skipped,contained_freq,contained_se,loo_inside_freq,nested_freq,"
           "mean_center_offset,mean_two_sample_width,mean_loo_width\n";
    for (const auto& r : rows) {
        out << '"' << r.config << "\"," << r.kpi << ',' << r.reps_used << ',' << r.reps_skipped << ','
            << format_double(r.contained_freq()) << ',' << format_double(r.contained_se()) << ','
            << format_double(r.loo_inside_freq()) << ',' << format_double(r.nested_freq()) << ','
            << format_double(r.mean_center_offset) << ',' << format_double(r.mean_two_sample_width) << ',';
        for (std::size_t i = 0; i < r.mean_loo_width.size(); ++i) {
            out << (i ? ";" : "") << format_double(r.mean_loo_width[i]);
        }
        out << '\n';
    }
}

double coupling_closed_form(long n, long k) {
    if (n < 2 || k < 1 || k > n) throw DomainError("coupling needs n >= 2 and 1 <= k <= n");
    const double nd = static_cast<double>(n);
    const double kd = static_cast<double>(k);
    return kd * (kd - nd) / (nd * nd * (nd - 1.0));
}

CouplingEstimate run_coupling_check(long n, long k, long reps, std::uint64_t seed) {
    const double closed = coupling_closed_form(n, k);
    if (reps < 2) throw DomainError("coupling check needs reps >= 2");
    // joint counts of (I_1, I_2)
    long cells[2][2] = {{0, 0}, {0, 0}};
    std::vector<double> scores(static_cast<std::size_t>(n));
    for (long rep = 0; rep < reps; ++rep) {
        Rng rng(seed, static_cast<std::uint64_t>(rep));
        for (auto& s : scores) s = rng.uniform_open();
        const double tau = conformal::order_statistic(scores, k);
        ++cells[scores[0] <= tau ? 1 : 0][scores[1] <= tau ? 1 : 0];
    }
    const double r = static_cast<double>(reps);
    const double p1 = static_cast<double>(cells[1][0] + cells[1][1]) / r;
    const double p2 = static_cast<double>(cells[0][1] + cells[1][1]) / r;
    const double p11 = static_cast<double>(cells[1][1]) / r;
    const double est = p11 - p1 * p2;
    // variance of the centered product (I_1 - p1)(I_2 - p2) over the four joint outcomes
    double second = 0.0;
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            const double prod = (a - p1) * (b - p2);
            second += static_cast<double>(cells[a][b]) / r * (prod - est) * (prod - est);
        }
    }
    return {n, k, reps, est, std::sqrt(second / r), closed};
}

double coupling_exhaustive(long n, long k) {
    if (n < 2 || n > 9 || k < 1 || k > n) throw DomainError("exhaustive coupling needs 2 <= n <= 9, 1 <= k <= n");
    std::vector<int> ranks(static_cast<std::size_t>(n));
    std::iota(ranks.begin(), ranks.end(), 1);
    double count = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    double s12 = 0.0;
    do {
        // tau is the k-th smallest, so item i crosses iff its rank <= k
        const double i1 = ranks[0] <= k ? 1.0 : 0.0;
        const double i2 = ranks[1] <= k ? 1.0 : 0.0;
        count += 1.0;
        s1 += i1;
        s2 += i2;
        s12 += i1 * i2;
    } while (std::next_permutation(ranks.begin(), ranks.end()));
    return s12 / count - (s1 / count) * (s2 / count);
}

} // namespace opcal::simlab
