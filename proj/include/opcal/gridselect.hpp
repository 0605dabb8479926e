#pragma once

#include <optional>
#include <string>
#include <vector>

namespace opcal {

/// Deployment regime: either the infinite-window Beta law or a finite window of m predictions.
class Regime {
public:
    static Regime infinite() { return Regime{0}; }
    static Regime finite(long window);

    bool is_finite() const noexcept { return window_ > 0; }
    long window() const noexcept { return window_; }

    /// "inf" or "win:<m>".
    std::string to_string() const;
    static Regime parse(const std::string& text);

    friend bool operator==(const Regime&, const Regime&) = default;

private:
    explicit Regime(long window) : window_(window) {}
    long window_;
};

enum class Method { Nominal, DKWM, SSBC };

std::string to_string(Method m);
Method parse_method(const std::string& text);

struct CoverageRequest {
    double alpha_star;
    double delta;
    long n_cal;
    Regime regime = Regime::infinite();

    void validate() const;
};

/// A chosen point on the conformal grid, with the request that produced it.
struct GridSelection {
    long u;          ///< miscoverage grid index, 1 <= u <= n_cal
    long k;          ///< order-statistic index, n_cal + 1 - u
    long n_cal;
    Method method;
    CoverageRequest request;
    /// DKWM only: the shifted continuous level alpha* - eps (may be negative).
    std::optional<double> alpha_cont;

    double alpha_grid() const noexcept { return static_cast<double>(u) / static_cast<double>(n_cal + 1); }
};

namespace gridselect {

GridSelection nominal_index(const CoverageRequest& req);
GridSelection dkwm_index(const CoverageRequest& req);

/// Largest admissible grid index, or nullopt when no index meets the tail constraint.
std::optional<GridSelection> ssbc_index(const CoverageRequest& req);

/// Dispatch on method; Nominal and DKWM never return nullopt.
std::optional<GridSelection> select_index(Method method, const CoverageRequest& req);

/// 1 - delta^(1/n_cal): the smallest infinite-window request SSBC can certify.
double feasibility_floor(double delta, long n_cal);

/// Count threshold x*: the smallest window count with x / m >= 1 - alpha*.
long window_success_threshold(double alpha_star, long m);

/// Probability that realized coverage falls below 1 - alpha* at grid index u.
/// Infinite window: I_{1-alpha*}(k, u). Finite window: P(S_m <= x* - 1).
double violation_probability(double alpha_star, long n_cal, long u, const Regime& regime);

struct SemanticMap {
    std::vector<double> alpha_grid;
    std::vector<double> delta_grid;
    long n_cal;
    Regime regime;
    /// cells[i * delta_grid.size() + j] holds alpha_adj at (alpha_grid[i], delta_grid[j]).
    std::vector<std::optional<double>> cells;

    const std::optional<double>& at(std::size_t alpha_idx, std::size_t delta_idx) const {
        return cells[alpha_idx * delta_grid.size() + delta_idx];
    }
};

SemanticMap semantic_map(const std::vector<double>& alpha_grid, const std::vector<double>& delta_grid, long n_cal,
                         const Regime& regime);

} // namespace gridselect
} // namespace opcal
