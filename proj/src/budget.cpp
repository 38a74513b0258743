#include "impatient/budget.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "impatient/error.hpp"

namespace impatient {

namespace {

constexpr double kIntegralTolerance = 1e-6;

std::vector<double> normalized(std::vector<double> w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace

// ---------------------------------------------------------------------------
// BudgetDensity

BudgetDensity BudgetDensity::piecewise(std::vector<double> breakpoints, std::vector<double> values) {
  if (breakpoints.size() < 2 || values.size() + 1 != breakpoints.size()) {
    throw ConfigError("piecewise density needs n+1 breakpoints for n pieces");
  }
  BudgetDensity d;
  d.family_ = Family::piecewise_constant;
  d.cumulative_.push_back(0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(breakpoints[i + 1] > breakpoints[i])) {
      throw ConfigError("density breakpoints must be strictly increasing");
    }
    if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
      throw ConfigError("density values must be finite and nonnegative");
    }
    d.cumulative_.push_back(d.cumulative_.back() + values[i] * (breakpoints[i + 1] - breakpoints[i]));
  }
  if (std::abs(d.cumulative_.back() - 1.0) > kIntegralTolerance) {
    throw ConfigError("density integrates to " + std::to_string(d.cumulative_.back()) +
                      ", expected 1");
  }
  d.breakpoints_ = std::move(breakpoints);
  d.values_ = std::move(values);
  return d;
}

BudgetDensity BudgetDensity::uniform(double low, double high) {
  if (!(high > low)) throw ConfigError("uniform density needs low < high");
  return piecewise({low, high}, {1.0 / (high - low)});
}

BudgetDensity BudgetDensity::exponential(double rate, double offset) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw ConfigError("exponential rate must be positive");
  BudgetDensity d;
  d.family_ = Family::exponential;
  d.rate_ = rate;
  d.offset_ = offset;
  return d;
}

BudgetDensity BudgetDensity::point_mass(double at) {
  if (!std::isfinite(at)) throw ConfigError("point mass location must be finite");
  BudgetDensity d;
  d.family_ = Family::point_mass;
  d.offset_ = at;
  return d;
}

double BudgetDensity::cdf(double t) const {
  switch (family_) {
    case Family::piecewise_constant: {
      if (t <= breakpoints_.front()) return 0.0;
      if (t >= breakpoints_.back()) return 1.0;
      const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
      const auto i = static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
      // Scaled by the total so the last breakpoint maps to exactly 1.
      return (cumulative_[i] + values_[i] * (t - breakpoints_[i])) / cumulative_.back();
    }
    case Family::exponential:
      if (t <= offset_) return 0.0;
      return -std::expm1(-rate_ * (t - offset_));
    case Family::point_mass:
      return t > offset_ ? 1.0 : 0.0;
  }
  return 0.0;
}

nlohmann::json BudgetDensity::to_json() const {
  switch (family_) {
    case Family::piecewise_constant:
      return {{"type", "piecewise"}, {"breakpoints", breakpoints_}, {"densities", values_}};
    case Family::exponential:
      return {{"type", "exponential"}, {"rate", rate_}, {"offset", offset_}};
    case Family::point_mass:
      return {{"type", "point"}, {"at", offset_}};
  }
  return {};
}

BudgetDensity BudgetDensity::from_json(const nlohmann::json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "piecewise") {
      return piecewise(j.at("breakpoints").get<std::vector<double>>(),
                       j.at("densities").get<std::vector<double>>());
    }
    if (type == "uniform") return uniform(j.at("low").get<double>(), j.at("high").get<double>());
    if (type == "exponential") {
      return exponential(j.at("rate").get<double>(), j.value("offset", 0.0));
    }
    if (type == "point") return point_mass(j.at("at").get<double>());
    throw ConfigError("unknown density type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad density config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// ExitSchedule

ExitSchedule::ExitSchedule(std::vector<double> times) : times_(std::move(times)) {
  if (times_.empty()) throw ConfigError("exit schedule needs at least one exit");
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (!std::isfinite(times_[k])) throw ConfigError("exit times must be finite");
    if (k > 0 && !(times_[k] > times_[k - 1])) {
      throw ConfigError("exit times must be strictly increasing");
    }
  }
}

// ---------------------------------------------------------------------------
// Schemes

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::std_: return "std";
    case SchemeKind::eq: return "eq";
    case SchemeKind::lin: return "lin";
    case SchemeKind::poly: return "poly";
    case SchemeKind::ilin: return "ilin";
    case SchemeKind::ipoly: return "ipoly";
    case SchemeKind::norm: return "norm";
    case SchemeKind::from_density: return "density";
  }
  return "unknown";
}

SchemeKind scheme_kind_from_string(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto kind : {SchemeKind::std_, SchemeKind::eq, SchemeKind::lin, SchemeKind::poly,
                    SchemeKind::ilin, SchemeKind::ipoly, SchemeKind::norm,
                    SchemeKind::from_density}) {
    if (to_string(kind) == lower) return kind;
  }
  throw ConfigError("unknown weighting scheme '" + name + "'");
}

WeightScheme WeightScheme::named(SchemeKind kind, std::size_t heads) {
  if (kind == SchemeKind::from_density) {
    throw ConfigError("density scheme needs a density and an exit schedule");
  }
  WeightScheme s;
  s.kind = kind;
  s.heads = heads;
  return s;
}

WeightScheme WeightScheme::from_density(BudgetDensity density, ExitSchedule schedule) {
  WeightScheme s;
  s.kind = SchemeKind::from_density;
  s.heads = schedule.size();
  s.density = std::move(density);
  s.schedule = std::move(schedule);
  return s;
}

std::vector<double> weights_from_density(const BudgetDensity& density,
                                         const ExitSchedule& schedule) {
  const std::size_t k_count = schedule.size();
  std::vector<double> w(k_count);
  for (std::size_t k = 0; k + 1 < k_count; ++k) w[k] = density.mass(schedule[k], schedule[k + 1]);
  w[k_count - 1] = 1.0 - density.cdf(schedule[k_count - 1]);
  const double reachable = 1.0 - density.cdf(schedule[0]);
  if (!(reachable > 1e-12)) {
    throw ConfigError("all budget mass lies before the first exit; no head is reachable");
  }
  for (auto& v : w) v = std::max(v, 0.0) / reachable;
  return normalized(std::move(w));
}

std::vector<double> scheme_weights(const WeightScheme& scheme) {
  if (scheme.kind == SchemeKind::from_density) {
    if (!scheme.density || !scheme.schedule) {
      throw ConfigError("density scheme needs a density and an exit schedule");
    }
    return weights_from_density(*scheme.density, *scheme.schedule);
  }
  const std::size_t k_count = scheme.heads;
  if (k_count == 0) throw ConfigError("weighting scheme needs at least one head");
  if ((scheme.kind == SchemeKind::poly || scheme.kind == SchemeKind::ipoly) &&
      !(scheme.gamma > 1.0)) {
    throw ConfigError("polynomial weighting needs gamma > 1");
  }
  if (scheme.kind == SchemeKind::norm && !(scheme.beta > 0.0)) {
    throw ConfigError("normal weighting needs beta > 0");
  }

  std::vector<double> w(k_count, 0.0);
  const auto position = [](std::size_t k) { return static_cast<double>(k + 1); };
  switch (scheme.kind) {
    case SchemeKind::std_:
      w.back() = 1.0;
      return w;
    case SchemeKind::eq:
      std::fill(w.begin(), w.end(), 1.0);
      break;
    case SchemeKind::lin:
    case SchemeKind::ilin:
      for (std::size_t k = 0; k < k_count; ++k) w[k] = position(k);
      break;
    case SchemeKind::poly:
    case SchemeKind::ipoly:
      for (std::size_t k = 0; k < k_count; ++k) w[k] = std::pow(position(k), scheme.gamma);
      break;
    case SchemeKind::norm: {
      const double center = (static_cast<double>(k_count) + 1.0) / 2.0;
      for (std::size_t k = 0; k < k_count; ++k) {
        const double d = position(k) - center;
        w[k] = std::exp(-scheme.beta * d * d);
      }
      break;
    }
    case SchemeKind::from_density:
      break;
  }
  w = normalized(std::move(w));
  if (scheme.kind == SchemeKind::ilin || scheme.kind == SchemeKind::ipoly) {
    std::reverse(w.begin(), w.end());
  }
  return w;
}

// ---------------------------------------------------------------------------
// BudgetSpec

BudgetSpec BudgetSpec::from_json(const nlohmann::json& j) {
  BudgetSpec spec;
  try {
    spec.kind = scheme_kind_from_string(j.at("scheme").get<std::string>());
    spec.gamma = j.value("gamma", WeightScheme::kDefaultGamma);
    spec.beta = j.value("beta", WeightScheme::kDefaultBeta);
    if (spec.kind == SchemeKind::from_density) {
      spec.density = BudgetDensity::from_json(j.at("density"));
      const auto& exits = j.at("exits");
      if (exits.is_string()) {
        spec.exits_from = exits.get<std::string>();
        if (spec.exits_from != "t_a" && spec.exits_from != "t_b") {
          throw ConfigError("exits must be a list of times, \"t_a\" or \"t_b\"");
        }
      } else {
        spec.exits = exits.get<std::vector<double>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad budget config: ") + e.what());
  }
  return spec;
}

nlohmann::json BudgetSpec::to_json() const {
  nlohmann::json j{{"scheme", to_string(kind)}};
  if (kind == SchemeKind::poly || kind == SchemeKind::ipoly) j["gamma"] = gamma;
  if (kind == SchemeKind::norm) j["beta"] = beta;
  if (kind == SchemeKind::from_density) {
    j["density"] = density->to_json();
    if (exits_from.empty()) {
      j["exits"] = exits;
    } else {
      j["exits"] = exits_from;
    }
  }
  return j;
}

WeightScheme BudgetSpec::resolve(std::size_t heads, const std::vector<double>* t_a,
                                 const std::vector<double>* t_b) const {
  if (kind != SchemeKind::from_density) {
    WeightScheme s = WeightScheme::named(kind, heads);
    s.gamma = gamma;
    s.beta = beta;
    return s;
  }
  std::vector<double> times = exits;
  if (exits_from == "t_a" || exits_from == "t_b") {
    const auto* costs = exits_from == "t_a" ? t_a : t_b;
    if (!costs) throw ConfigError("budget exits refer to " + exits_from + " but no cost model is available");
    times = *costs;
  }
  if (times.size() != heads) {
    throw ConfigError("budget lists " + std::to_string(times.size()) + " exits for a " +
                      std::to_string(heads) + "-head network");
  }
  return WeightScheme::from_density(*density, ExitSchedule(std::move(times)));
}

}  // namespace impatient
