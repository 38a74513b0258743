#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace impatient {

/// Distribution of the time budget available at inference.
///
/// `cdf(t)` is P(T < t), so mass sitting exactly on an exit time belongs to
/// the interval that starts there (intervals are closed on the left).
class BudgetDensity {
 public:
  enum class Family { piecewise_constant, exponential, point_mass };

  /// Density `values[i]` on [breakpoints[i], breakpoints[i+1]). Must be
  /// nonnegative and integrate to 1 within 1e-6.
  static BudgetDensity piecewise(std::vector<double> breakpoints, std::vector<double> values);
  static BudgetDensity uniform(double low, double high);
  /// rate * exp(-rate * (t - offset)) for t >= offset.
  static BudgetDensity exponential(double rate, double offset = 0.0);
  static BudgetDensity point_mass(double at);

  Family family() const { return family_; }
  double cdf(double t) const;
  /// P(a <= T < b).
  double mass(double a, double b) const { return cdf(b) - cdf(a); }

  nlohmann::json to_json() const;
  static BudgetDensity from_json(const nlohmann::json& j);

 private:
  BudgetDensity() = default;

  Family family_ = Family::point_mass;
  std::vector<double> breakpoints_;
  std::vector<double> values_;
  std::vector<double> cumulative_;
  double rate_ = 0.0;
  double offset_ = 0.0;
};

/// Strictly increasing exit times t_1 < ... < t_K.
class ExitSchedule {
 public:
  explicit ExitSchedule(std::vector<double> times);

  std::size_t size() const { return times_.size(); }
  double operator[](std::size_t k) const { return times_[k]; }
  const std::vector<double>& times() const { return times_; }

 private:
  std::vector<double> times_;
};

enum class SchemeKind { std_, eq, lin, poly, ilin, ipoly, norm, from_density };

std::string to_string(SchemeKind kind);
SchemeKind scheme_kind_from_string(const std::string& name);

struct WeightScheme {
  static constexpr double kDefaultGamma = 2.0;
  static constexpr double kDefaultBeta = 0.34;

  SchemeKind kind = SchemeKind::eq;
  std::size_t heads = 1;
  double gamma = kDefaultGamma;
  double beta = kDefaultBeta;
  std::optional<BudgetDensity> density;
  std::optional<ExitSchedule> schedule;

  static WeightScheme named(SchemeKind kind, std::size_t heads);
  static WeightScheme from_density(BudgetDensity density, ExitSchedule schedule);

  std::string name() const { return to_string(kind); }
};

/// w_k = P(t_k <= T < t_{k+1}), w_K = P(T >= t_K), renormalized after
/// dropping the mass that falls before t_1.
std::vector<double> weights_from_density(const BudgetDensity& density,
                                         const ExitSchedule& schedule);

/// Normalized head weights for any scheme; they are nonnegative and sum to 1.
std::vector<double> scheme_weights(const WeightScheme& scheme);

/// Budget section of a run config before the head count and the cost
/// model are known. See README for the grammar.
struct BudgetSpec {
  SchemeKind kind = SchemeKind::eq;
  double gamma = WeightScheme::kDefaultGamma;
  double beta = WeightScheme::kDefaultBeta;
  std::optional<BudgetDensity> density;
  /// Explicit exit times, or empty when `exits_from` names a cost column.
  std::vector<double> exits;
  /// "", "t_a" or "t_b".
  std::string exits_from;

  static BudgetSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// `costs` supplies t_A / t_B when `exits_from` refers to them.
  WeightScheme resolve(std::size_t heads, const std::vector<double>* t_a = nullptr,
                       const std::vector<double>* t_b = nullptr) const;
};

}  // namespace impatient
