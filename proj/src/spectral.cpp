#include "dpplab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dpplab/error.hpp"

namespace dpp {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Reduce t onto [-1/2, 1/2).
double wrap(double t) { return t - std::floor(t + 0.5); }

bool contains(std::span<const Interval> set, double t) {
  auto it = std::upper_bound(set.begin(), set.end(), t,
                             [](double v, const Interval& iv) { return v < iv.lo; });
  if (it == set.begin()) return false;
  --it;
  return t <= it->hi;
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedSpectral: return "MalformedSpectral";
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::AdmissibilityLost: return "AdmissibilityLost";
    case ErrorCode::EnvelopeViolated: return "EnvelopeViolated";
    case ErrorCode::DuplicateSites: return "DuplicateSites";
    case ErrorCode::MissingFourier: return "MissingFourier";
    case ErrorCode::OrderTooLarge: return "OrderTooLarge";
    case ErrorCode::NumericallySingular: return "NumericallySingular";
    case ErrorCode::TooManySites: return "TooManySites";
    case ErrorCode::DegenerateProjection: return "DegenerateProjection";
    case ErrorCode::VarianceTooSmall: return "VarianceTooSmall";
    case ErrorCode::SigmaZero: return "SigmaZero";
    case ErrorCode::MZero: return "MZero";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

std::vector<Interval> normalize_intervals(std::vector<Interval> intervals) {
  for (const auto& iv : intervals) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.hi < iv.lo) {
      throw Error(ErrorCode::MalformedSpectral,
                  "interval [" + fmt(iv.lo) + ", " + fmt(iv.hi) + "] is not a valid interval");
    }
  }
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  out.reserve(intervals.size());
  for (const auto& iv : intervals) {
    if (!out.empty() && iv.lo < out.back().hi) {
      throw Error(ErrorCode::MalformedSpectral, "intervals [" + fmt(out.back().lo) + ", " +
                                                    fmt(out.back().hi) + "] and [" + fmt(iv.lo) +
                                                    ", " + fmt(iv.hi) + "] overlap");
    }
    if (!out.empty() && iv.lo == out.back().hi) {
      out.back().hi = iv.hi;
      continue;
    }
    out.push_back(iv);
  }
  return out;
}

double shifted_overlap(std::span<const Interval> set, double shift) {
  double total = 0.0;
  std::size_t i = 0, j = 0;
  while (i < set.size() && j < set.size()) {
    const double a_lo = set[i].lo, a_hi = set[i].hi;
    const double b_lo = set[j].lo + shift, b_hi = set[j].hi + shift;
    const double lo = std::max(a_lo, b_lo);
    const double hi = std::min(a_hi, b_hi);
    if (hi > lo) total += hi - lo;
    if (a_hi < b_hi) {
      ++i;
    } else {
      ++j;
    }
  }
  return total;
}

double interval_m_lambda(std::span<const Interval> set, double lambda) {
  double mass = 0.0;
  for (const auto& iv : set) mass += iv.length();
  return mass - shifted_overlap(set, std::abs(lambda));
}

SpectralFunction SpectralFunction::intervals(std::vector<Interval> set) {
  SpectralFunction s;
  s.kind_ = Kind::interval_union;
  s.name_ = "intervals";
  s.intervals_ = normalize_intervals(std::move(set));
  for (const auto& iv : s.intervals_) {
    if (iv.lo < -0.5 || iv.hi > 0.5) {
      throw Error(ErrorCode::MalformedSpectral,
                  "interval [" + fmt(iv.lo) + ", " + fmt(iv.hi) + "] leaves [-1/2, 1/2]");
    }
  }
  s.finish();
  return s;
}

SpectralFunction SpectralFunction::tabulated(std::vector<double> freq, std::vector<double> values) {
  if (freq.size() != values.size()) {
    throw Error(ErrorCode::MalformedSpectral, "frequency and value columns differ in length");
  }
  if (freq.size() < 2) throw Error(ErrorCode::MalformedSpectral, "need at least two grid points");
  for (std::size_t i = 0; i < freq.size(); ++i) {
    if (!std::isfinite(freq[i]) || !std::isfinite(values[i])) {
      throw Error(ErrorCode::MalformedSpectral, "non-finite grid entry at row " + std::to_string(i));
    }
    if (freq[i] < -0.5 || freq[i] > 0.5) {
      throw Error(ErrorCode::MalformedSpectral,
                  "frequency " + fmt(freq[i]) + " lies outside [-1/2, 1/2]");
    }
    if (i > 0 && !(freq[i] > freq[i - 1])) {
      throw Error(ErrorCode::MalformedSpectral, "frequency grid is not strictly increasing");
    }
  }
  SpectralFunction s;
  s.kind_ = Kind::tabulated;
  s.name_ = "tabulated";
  s.grid_ = std::move(freq);
  s.values_ = std::move(values);
  s.finish();
  return s;
}

SpectralFunction SpectralFunction::flat(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::MalformedSpectral, "flat value must be finite");
  SpectralFunction s = tabulated({-0.5, 0.5}, {value, value});
  s.name_ = "flat";
  s.params_ = {value};
  return s;
}

SpectralFunction SpectralFunction::sine(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw Error(ErrorCode::MalformedSpectral, "sine density rho must lie in (0, 1]");
  }
  SpectralFunction s = intervals({{-rho / 2, rho / 2}});
  s.name_ = "sine";
  s.params_ = {rho};
  return s;
}

SpectralFunction SpectralFunction::triangle() {
  SpectralFunction s;
  s.kind_ = Kind::triangle;
  s.name_ = "triangle";
  s.finish();
  return s;
}

SpectralFunction SpectralFunction::scaled_beta_union(double beta, int n_max) {
  if (!(beta > 1.0)) throw Error(ErrorCode::MalformedSpectral, "beta must exceed 1");
  if (n_max < 2) throw Error(ErrorCode::MalformedSpectral, "n_max must be at least 2");
  std::vector<Interval> raw;
  raw.reserve(static_cast<std::size_t>(n_max));
  for (int n = 1; n <= n_max; ++n) {
    raw.push_back({double(n), n + std::pow(double(n), -beta)});
  }
  raw = normalize_intervals(std::move(raw));
  const double lo = raw.front().lo;
  const double scale = 0.5 / (raw.back().hi - lo);
  for (auto& iv : raw) {
    iv.lo = (iv.lo - lo) * scale;
    iv.hi = (iv.hi - lo) * scale;
  }
  raw.back().hi = std::min(raw.back().hi, 0.5);
  SpectralFunction s = intervals(std::move(raw));
  s.name_ = "scaled_beta_union";
  s.params_ = {beta, double(n_max)};
  double shortest = 1.0;
  for (const auto& iv : s.intervals_) shortest = std::min(shortest, iv.length());
  s.resolution_floor_ = shortest;
  return s;
}

void SpectralFunction::finish() {
  switch (kind_) {
    case Kind::interval_union: {
      double mass = 0.0;
      for (const auto& iv : intervals_) mass += iv.length();
      total_mass_ = mass;
      break;
    }
    case Kind::triangle:
      total_mass_ = 0.5;
      break;
    case Kind::tabulated: {
      double sum = 0.0;
      const std::size_t m = kSpectralQuadraturePoints;
      for (std::size_t j = 0; j < m; ++j) sum += (*this)(-0.5 + double(j) / m);
      total_mass_ = sum / double(m);
      break;
    }
  }
}

double SpectralFunction::operator()(double t) const {
  const double u = wrap(t);
  switch (kind_) {
    case Kind::interval_union:
      return (contains(intervals_, u) || contains(intervals_, u + 1.0) ||
              contains(intervals_, u - 1.0))
                 ? 1.0
                 : 0.0;
    case Kind::triangle:
      return std::max(0.0, 1.0 - std::abs(2.0 * u));
    case Kind::tabulated: {
      const auto& g = grid_;
      const auto& v = values_;
      auto it = std::upper_bound(g.begin(), g.end(), u);
      if (it == g.begin() || it == g.end()) {
        // Wrap segment from the last node (shifted down by one period) to the first.
        const double x0 = g.back() - 1.0, x1 = g.front();
        const double uu = (it == g.end()) ? u - 1.0 : u;
        if (x1 == x0) return v.front();
        const double w = (uu - x0) / (x1 - x0);
        return v.back() + w * (v.front() - v.back());
      }
      const std::size_t k = static_cast<std::size_t>(it - g.begin());
      const double w = (u - g[k - 1]) / (g[k] - g[k - 1]);
      return v[k - 1] + w * (v[k] - v[k - 1]);
    }
  }
  return 0.0;
}

std::string SpectralFunction::describe() const {
  std::ostringstream os;
  if (name_ == "sine") {
    os << "named(\"sine\", rho=" << fmt(params_[0]) << ")";
  } else if (name_ == "triangle") {
    os << "named(\"triangle\")";
  } else if (name_ == "flat") {
    os << "named(\"flat\", value=" << fmt(params_[0]) << ")";
  } else if (name_ == "scaled_beta_union") {
    os << "named(\"scaled_beta_union\", beta=" << fmt(params_[0])
       << ", n_max=" << static_cast<int>(params_[1]) << ")";
  } else if (kind_ == Kind::interval_union) {
    os << "intervals([";
    for (std::size_t i = 0; i < intervals_.size(); ++i) {
      if (i) os << ",";
      os << "[" << fmt(intervals_[i].lo) << "," << fmt(intervals_[i].hi) << "]";
    }
    os << "])";
  } else {
    os << "tabulated(" << grid_.size() << " points)";
  }
  return os.str();
}

std::vector<double> SpectralFunction::sample(std::size_t n) const {
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    // Integer numerator keeps the grid exactly symmetric under t -> -t.
    const long m = static_cast<long>(j) - static_cast<long>(n / 2);
    out[j] = (*this)(double(m) / double(n));
  }
  return out;
}

ValidationReport validate_spectral(const SpectralFunction& s) {
  ValidationReport r;
  r.total_mass = s.total_mass();
  switch (s.kind()) {
    case SpectralFunction::Kind::interval_union: {
      r.max_value = r.total_mass > 0.0 ? 1.0 : 0.0;
      r.min_value = r.total_mass >= 1.0 ? 1.0 : 0.0;
      break;
    }
    case SpectralFunction::Kind::triangle:
      r.min_value = 0.0;
      r.max_value = 1.0;
      break;
    case SpectralFunction::Kind::tabulated: {
      auto v = s.grid_values();
      r.min_value = *std::min_element(v.begin(), v.end());
      r.max_value = *std::max_element(v.begin(), v.end());
      break;
    }
  }
  if (r.min_value < 0.0) {
    r.in_range = false;
    r.violations.push_back("minimum value " + fmt(r.min_value) + " is below 0");
  }
  if (r.max_value > 1.0) {
    r.in_range = false;
    r.violations.push_back("maximum value " + fmt(r.max_value) + " exceeds 1");
  }
  r.sigma2 = sigma2(s);
  return r;
}

double sigma2(const SpectralFunction& s) { return m_lambda(s, 0.0); }

double m_lambda(const SpectralFunction& s, double lambda) {
  double shift = std::abs(lambda);
  shift -= std::floor(shift);
  if (s.kind() == SpectralFunction::Kind::interval_union) {
    const auto set = s.interval_set();
    return s.total_mass() - (shifted_overlap(set, shift) + shifted_overlap(set, shift - 1.0));
  }
  // Both symbol kinds are piecewise linear; between the merged breakpoints of
  // A(t) and A(t - shift) the integrand is quadratic, so Simpson is exact.
  std::vector<double> knots;
  if (s.kind() == SpectralFunction::Kind::triangle) {
    knots = {-0.5, 0.0};
  } else {
    knots.assign(s.grid().begin(), s.grid().end());
  }
  const std::size_t base = knots.size();
  for (std::size_t i = 0; i < base; ++i) {
    double k = knots[i] + shift;
    if (k >= 0.5) k -= 1.0;
    knots.push_back(k);
  }
  knots.push_back(-0.5);
  knots.push_back(0.5);
  std::sort(knots.begin(), knots.end());
  double sum = 0.0;
  auto g = [&](double t) {
    const double a = s(t);
    return a - a * s(t - shift);
  };
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double lo = knots[i], hi = knots[i + 1];
    if (!(hi > lo)) continue;
    sum += (hi - lo) / 6.0 * (g(lo) + 4.0 * g(0.5 * (lo + hi)) + g(hi));
  }
  return sum;
}

}  // namespace dpp
