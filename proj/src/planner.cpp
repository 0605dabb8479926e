#include "opcal/planner.hpp"

#include "opcal/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace opcal {

void SweepSpec::validate() const {
    auto check_grid = [](const std::vector<double>& g, const char* name) {
        if (g.empty()) throw DomainError(std::string(name) + " grid is empty");
        for (double v : g) {
            if (!(v > 0.0 && v < 1.0)) throw DomainError(std::string(name) + " grid values must lie in (0, 1)");
        }
    };
    check_grid(alpha0_grid, "alpha0");
    check_grid(delta0_grid, "delta0");
    check_grid(alpha1_grid, "alpha1");
    check_grid(delta1_grid, "delta1");
    if (kpis.empty()) throw DomainError("sweep needs at least one KPI");
    if (orientation.size() != kpis.size()) throw DomainError("orientation must cover every KPI");
    for (const auto& name : kpis) {
        try {
            (void)audit::mask_by_name(policy, name);
        } catch (const NotFound&) {
            throw DomainError("unknown KPI '" + name + "'");
        }
    }
    for (int s : orientation) {
        if (s != 1 && s != -1) throw DomainError("orientation entries must be +1 or -1");
    }
    if (m < 1) throw DomainError("window size must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw DomainError("envelope level must lie in (0, 1)");
    if (!(infl >= 1.0)) throw DomainError("inflation must be >= 1");
    if (!(offset > 0.0)) throw DomainError("prior offset must be positive");
}

std::vector<std::string> SweepSpec::default_kpis() {
    return {"set0_y0", "set0_y1", "set1_y0", "set1_y1", "set01_y0", "set01_y1", "empty_y0", "empty_y1"};
}

std::vector<int> SweepSpec::default_orientation() { return {1, -1, -1, 1, -1, -1, -1, -1}; }

std::string to_string(EvalMode m) { return m == EvalMode::TwoSample ? "two_sample" : "loo"; }

const KpiValue& OperatingPoint::kpi(const std::string& name) const {
    for (const auto& k : kpis) {
        if (k.name == name) return k;
    }
    throw NotFound("operating point has no KPI '" + name + "'");
}

std::vector<double> OperatingPoint::rate_vector() const {
    std::vector<double> v;
    v.reserve(kpis.size());
    for (const auto& k : kpis) v.push_back(k.rate);
    return v;
}

namespace planner {

namespace {

std::string describe(const Request4& r) {
    std::ostringstream os;
    os << "(" << r.alpha0 << ", " << r.delta0 << ", " << r.alpha1 << ", " << r.delta1 << ")";
    return os.str();
}

bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
    bool strict = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return false;
        if (a[i] > b[i]) strict = true;
    }
    return strict;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

long parse_long(const std::string& text) {
    long v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw SpecError("bad integer field '" + text + "'");
    return v;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double parse_double(const std::string& text) {
    double v = 0.0;
    const auto* begin = text.data();
    const auto* end = begin + text.size();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) throw SpecError("bad numeric field '" + text + "'");
    return v;
}

OperatingPoint evaluate_cell(const SweepSpec& spec, const Request4& req, const ScoreSample& cal,
                             const ScoreSample* audit) {
    int bad_label = -1;
    const auto calib = conformal::calibrate(
        cal, {req.alpha0, req.delta0, req.alpha1, req.delta1, spec.regime, spec.method}, &bad_label);
    if (!calib) {
        const long n = cal.class_count(bad_label);
        const double delta = bad_label == 0 ? req.delta0 : req.delta1;
        throw Error("infeasible for class " + std::to_string(bad_label) + " (n=" + std::to_string(n) +
                    ", feasibility floor " + format_double(gridselect::feasibility_floor(delta, n)) + ")");
    }
    OperatingPoint p;
    p.request = req;
    p.sel0 = calib->sel0;
    p.sel1 = calib->sel1;
    p.thresholds = calib->thresholds;
    p.regime = conformal::regime_of(p.thresholds);
    if (audit != nullptr) {
        p.eval = EvalMode::TwoSample;
        p.table = audit::tabulate(*audit, p.thresholds);
    } else {
        p.eval = EvalMode::LOO;
        p.table = audit::loo_table(cal, p.sel0, p.sel1, spec.loo_mode);
    }
    for (const auto& name : spec.kpis) {
        const KpiMask mask = audit::mask_by_name(spec.policy, name);
        const Projection proj = audit::project(p.table, mask);
        KpiValue v{name, proj.count, proj.rate, {}};
        if (p.eval == EvalMode::TwoSample) {
            v.envelope = audit::envelope_two_sample(proj.count, p.table.n_total, spec.m, spec.level, spec.offset, name);
        } else {
            v.envelope = audit::envelope_loo({name, proj.count, p.table.n_total, {}}, spec.m, spec.level, spec.infl,
                                             spec.offset);
        }
        p.kpis.push_back(std::move(v));
    }
    return p;
}

SweepResult sweep(const SweepSpec& spec, const ScoreSample& cal, const ScoreSample* audit) {
    spec.validate();
    cal.validate();
    if (audit != nullptr) audit->validate();
    SweepResult result;
    for (double a0 : spec.alpha0_grid) {
        for (double d0 : spec.delta0_grid) {
            for (double a1 : spec.alpha1_grid) {
                for (double d1 : spec.delta1_grid) {
                    const Request4 req{a0, d0, a1, d1};
                    try {
                        result.points.push_back(evaluate_cell(spec, req, cal, audit));
                    } catch (const Error& e) {
                        result.failures.push_back({req, describe(req) + ": " + e.what()});
                    }
                }
            }
        }
    }
    mark_front(result.points, spec.orientation);
    return result;
}

std::vector<OperatingPoint> dedup(const std::vector<OperatingPoint>& points) {
    std::map<std::pair<long, long>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < points.size(); ++i) {
        groups[{points[i].sel0.u, points[i].sel1.u}].push_back(i);
    }
    std::vector<OperatingPoint> out;
    out.reserve(groups.size());
    long next_id = 1;
    for (const auto& [key, members] : groups) {
        auto order = [&](std::size_t i) {
            const auto& r = points[i].request;
            return std::tuple(r.alpha0, r.alpha1, r.delta0, r.delta1);
        };
        const std::size_t best =
            *std::max_element(members.begin(), members.end(), [&](std::size_t a, std::size_t b) { return order(a) < order(b); });
        OperatingPoint rep = points[best];
        rep.regime_id = next_id++;
        rep.multiplicity = static_cast<long>(members.size());
        out.push_back(std::move(rep));
    }
    return out;
}

std::vector<bool> pareto_filter(const std::vector<std::vector<double>>& vectors, std::span<const int> orientation) {
    const std::size_t n = vectors.size();
    std::vector<std::vector<double>> oriented(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (vectors[i].size() != orientation.size()) {
            throw DomainError("point " + std::to_string(i) + " does not carry every oriented KPI");
        }
        oriented[i].resize(orientation.size());
        for (std::size_t l = 0; l < orientation.size(); ++l) oriented[i][l] = orientation[l] * vectors[i][l];
    }
    // A dominator is lexicographically larger, so it is visited first; checking against the
    // running front suffices because dominance is transitive.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return oriented[a] > oriented[b]; });
    std::vector<bool> flags(n, false);
    std::vector<std::size_t> front;
    for (std::size_t idx : order) {
        const bool beaten = std::any_of(front.begin(), front.end(),
                                        [&](std::size_t f) { return dominates(oriented[f], oriented[idx]); });
        if (!beaten) {
            flags[idx] = true;
            front.push_back(idx);
        }
    }
    return flags;
}

void mark_front(std::vector<OperatingPoint>& points, std::span<const int> orientation) {
    std::vector<std::vector<double>> vectors;
    vectors.reserve(points.size());
    for (const auto& p : points) vectors.push_back(p.rate_vector());
    const auto flags = pareto_filter(vectors, orientation);
    for (std::size_t i = 0; i < points.size(); ++i) points[i].nondominated = flags[i];
}

std::vector<OperatingPoint> collapse_kpi_duplicates(const std::vector<OperatingPoint>& points) {
    std::vector<OperatingPoint> out;
    for (const auto& p : points) {
        const auto v = p.rate_vector();
        auto it = std::find_if(out.begin(), out.end(), [&](const OperatingPoint& q) { return q.rate_vector() == v; });
        if (it == out.end()) {
            out.push_back(p);
        } else {
            it->multiplicity += p.multiplicity;
        }
    }
    return out;
}

MenuRow to_menu_row(const OperatingPoint& p) {
    MenuRow row;
    row.regime_id = p.regime_id;
    row.multiplicity = p.multiplicity;
    row.request = p.request;
    row.alpha_ssbc_0 = p.sel0.alpha_grid();
    row.alpha_ssbc_1 = p.sel1.alpha_grid();
    row.u0 = p.sel0.u;
    row.u1 = p.sel1.u;
    row.tau0 = p.thresholds.tau0;
    row.tau1 = p.thresholds.tau1;
    row.regime = to_string(p.regime);
    for (const auto& k : p.kpis) row.kpis.push_back({k.rate, k.envelope.lo, k.envelope.hi});
    row.nondominated = p.nondominated;
    return row;
}

MenuTable to_menu_table(const std::vector<OperatingPoint>& points, const std::vector<std::string>& kpi_names) {
    MenuTable menu{kpi_names, {}};
    for (const auto& p : points) {
        if (p.kpis.size() != kpi_names.size()) throw DomainError("operating point KPI list does not match menu header");
        menu.rows.push_back(to_menu_row(p));
    }
    std::stable_sort(menu.rows.begin(), menu.rows.end(),
                     [](const MenuRow& a, const MenuRow& b) { return a.regime_id < b.regime_id; });
    return menu;
}

void write_menu_csv(std::ostream& out, const MenuTable& menu) {
    out << "regime_id,multiplicity,alpha0,delta0,alpha1,delta1,alpha_ssbc_0,alpha_ssbc_1,u0,u1,tau0,tau1,regime";
    for (const auto& k : menu.kpi_names) out << ',' << k << "_rate," << k << "_lo," << k << "_hi";
    out << ",nondominated\n";
    for (const auto& r : menu.rows) {
        out << r.regime_id << ',' << r.multiplicity << ',' << format_double(r.request.alpha0) << ','
            << format_double(r.request.delta0) << ',' << format_double(r.request.alpha1) << ','
            << format_double(r.request.delta1) << ',' << format_double(r.alpha_ssbc_0) << ','
            << format_double(r.alpha_ssbc_1) << ',' << r.u0 << ',' << r.u1 << ',' << format_double(r.tau0) << ','
            << format_double(r.tau1) << ',' << r.regime;
        for (const auto& k : r.kpis) out << ',' << format_double(k.rate) << ',' << k.lo << ',' << k.hi;
        out << ',' << (r.nondominated ? 1 : 0) << '\n';
    }
}

MenuTable read_menu_csv(std::istream& in) {
    static const std::vector<std::string> kFixed = {"regime_id", "multiplicity", "alpha0", "delta0", "alpha1",
                                                    "delta1",    "alpha_ssbc_0", "alpha_ssbc_1", "u0", "u1",
                                                    "tau0",      "tau1",         "regime"};
    std::string line;
    if (!std::getline(in, line)) throw SpecError("menu CSV is missing its header");
    const auto header = split_csv_line(line);
    if (header.size() < kFixed.size() + 1 || !std::equal(kFixed.begin(), kFixed.end(), header.begin()) ||
        header.back() != "nondominated" || (header.size() - kFixed.size() - 1) % 3 != 0) {
        throw SpecError("menu CSV header does not match the menu schema");
    }
    MenuTable menu;
    for (std::size_t c = kFixed.size(); c + 1 < header.size(); c += 3) {
        const std::string& col = header[c];
        if (col.size() < 6 || col.substr(col.size() - 5) != "_rate") throw SpecError("bad KPI column '" + col + "'");
        const std::string name = col.substr(0, col.size() - 5);
        if (header[c + 1] != name + "_lo" || header[c + 2] != name + "_hi") {
            throw SpecError("KPI columns for '" + name + "' are not a rate/lo/hi triple");
        }
        menu.kpi_names.push_back(name);
    }
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) throw MalformedRow(line_no, "expected " + std::to_string(header.size()) + " fields");
        MenuRow r;
        try {
            r.regime_id = parse_long(f[0]);
            r.multiplicity = parse_long(f[1]);
            r.request = {parse_double(f[2]), parse_double(f[3]), parse_double(f[4]), parse_double(f[5])};
            r.alpha_ssbc_0 = parse_double(f[6]);
            r.alpha_ssbc_1 = parse_double(f[7]);
            r.u0 = parse_long(f[8]);
            r.u1 = parse_long(f[9]);
            r.tau0 = parse_double(f[10]);
            r.tau1 = parse_double(f[11]);
            r.regime = f[12];
            for (std::size_t c = kFixed.size(); c + 1 < f.size(); c += 3) {
                r.kpis.push_back({parse_double(f[c]), parse_long(f[c + 1]), parse_long(f[c + 2])});
            }
            r.nondominated = parse_long(f.back()) != 0;
        } catch (const SpecError& e) {
            throw MalformedRow(line_no, e.what());
        }
        menu.rows.push_back(std::move(r));
    }
    return menu;
}

void export_menu(const std::vector<OperatingPoint>& points, const std::vector<std::string>& kpi_names,
                 const std::filesystem::path& path) {
    const MenuTable menu = to_menu_table(points, kpi_names);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open menu file '" + path.string() + "' for writing");
    write_menu_csv(out, menu);
    out.flush();
    if (!out) throw Error("failed writing menu file '" + path.string() + "'");
}

MenuTable import_menu(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open menu file '" + path.string() + "'");
    return read_menu_csv(in);
}

} // namespace planner
} // namespace opcal
