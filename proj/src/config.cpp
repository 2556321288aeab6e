#include "dpplab/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <variant>

#include "dpplab/error.hpp"
#include "dpplab/hash.hpp"

namespace dpp {

namespace {

struct Value;
using List = std::vector<Value>;

struct Call {
  std::string name;
  std::vector<Value> args;
  std::vector<std::pair<std::string, Value>> kwargs;
};

struct Value {
  // number, quoted string, bare identifier, list, call
  std::variant<double, std::string, std::monostate, List, Call> v;
  std::string ident;

  bool is_number() const { return std::holds_alternative<double>(v); }
  bool is_string() const { return std::holds_alternative<std::string>(v); }
  bool is_ident() const { return std::holds_alternative<std::monostate>(v); }
  bool is_list() const { return std::holds_alternative<List>(v); }
  bool is_call() const { return std::holds_alternative<Call>(v); }
};

struct Failure {
  std::string what;
};

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  Value parse_all() {
    Value v = value();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(s_.substr(pos_)) + "'");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& why) { throw Failure{why}; }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }

  std::string identifier() {
    skip();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  Value value() {
    skip();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    Value out;
    if (c == '[') {
      ++pos_;
      List items;
      if (!eat(']')) {
        do items.push_back(value());
        while (eat(','));
        expect(']');
      }
      out.v = std::move(items);
      return out;
    }
    if (c == '"') {
      const std::size_t end = s_.find('"', pos_ + 1);
      if (end == std::string_view::npos) fail("unterminated string");
      out.v = std::string(s_.substr(pos_ + 1, end - pos_ - 1));
      pos_ = end + 1;
      return out;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
      const char* begin = s_.data() + pos_ + (c == '+' ? 1 : 0);
      double d = 0.0;
      const auto r = std::from_chars(begin, s_.data() + s_.size(), d);
      if (r.ec != std::errc()) fail("bad number");
      pos_ = static_cast<std::size_t>(r.ptr - s_.data());
      out.v = d;
      return out;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string name = identifier();
      if (!eat('(')) {
        out.v = std::monostate{};
        out.ident = std::move(name);
        return out;
      }
      Call call;
      call.name = std::move(name);
      if (!eat(')')) {
        do {
          skip();
          const std::size_t save = pos_;
          std::string key = identifier();
          if (!key.empty() && eat('=')) {
            call.kwargs.emplace_back(key, value());
          } else {
            pos_ = save;
            call.args.push_back(value());
          }
        } while (eat(','));
        expect(')');
      }
      out.v = std::move(call);
      return out;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

double number(const Value& v, const std::string& what) {
  if (!v.is_number()) throw Failure{what + " must be a number"};
  return std::get<double>(v.v);
}

long integer(const Value& v, const std::string& what) {
  const double d = number(v, what);
  if (d != std::floor(d) || std::abs(d) > 9.0e15) throw Failure{what + " must be an integer"};
  return static_cast<long>(d);
}

std::string text_of(const Value& v) {
  if (v.is_string()) return std::get<std::string>(v.v);
  if (v.is_ident()) return v.ident;
  throw Failure{"expected a name"};
}

// Positional argument i, or keyword `name`, or the default.
std::optional<Value> arg(const Call& c, std::size_t i, const std::string& name) {
  for (const auto& [k, v] : c.kwargs)
    if (k == name) return v;
  if (i < c.args.size()) return c.args[i];
  return std::nullopt;
}

double arg_number(const Call& c, std::size_t i, const std::string& name, std::optional<double> def) {
  const auto v = arg(c, i, name);
  if (!v) {
    if (def) return *def;
    throw Failure{c.name + " needs argument '" + name + "'"};
  }
  return number(*v, c.name + "(" + name + ")");
}

void check_kwargs(const Call& c, const std::set<std::string>& allowed) {
  for (const auto& [k, v] : c.kwargs)
    if (!allowed.count(k)) throw Failure{c.name + " has no argument '" + k + "'"};
}

std::vector<double> number_list(const Value& v, const std::string& what) {
  if (!v.is_list()) throw Failure{what + " must be a list"};
  std::vector<double> out;
  for (const auto& item : std::get<List>(v.v)) out.push_back(number(item, what + " entry"));
  return out;
}

// Snap values that are integers up to round-off.
double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)) ? r : x;
}

std::vector<double> grid_values(const Value& v, const std::string& key) {
  if (v.is_list()) return number_list(v, key);
  if (!v.is_call() || std::get<Call>(v.v).name != "geom") throw Failure{"expected a list or geom(a, b, n)"};
  const Call& c = std::get<Call>(v.v);
  check_kwargs(c, {"a", "b", "n"});
  const double a = arg_number(c, 0, "a", std::nullopt);
  const double b = arg_number(c, 1, "b", std::nullopt);
  const double nd = arg_number(c, 2, "n", std::nullopt);
  if (!(a > 0.0) || !(b > 0.0)) throw Failure{"geom endpoints must be positive"};
  if (nd < 2 || nd != std::floor(nd)) throw Failure{"geom needs an integer n >= 2"};
  const long n = static_cast<long>(nd);
  std::vector<double> out;
  for (long i = 0; i < n; ++i) {
    out.push_back(snap(a * std::pow(b / a, double(i) / double(n - 1))));
  }
  out.front() = a;
  out.back() = b;
  return out;
}

SpectralFunction spectral_from(const Value& v, const std::filesystem::path& base_dir, std::string& decl) {
  if (v.is_string()) {
    std::filesystem::path p = std::get<std::string>(v.v);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    decl = "csv(" + std::get<std::string>(v.v) + ")";
    return load_spectral_csv(p);
  }
  if (!v.is_call()) throw Failure{"expected intervals(...), named(...) or a CSV path"};
  const Call& c = std::get<Call>(v.v);
  if (c.name == "intervals") {
    if (c.args.size() != 1 || !c.kwargs.empty()) throw Failure{"intervals takes one list of [a, b] pairs"};
    std::vector<Interval> set;
    if (!c.args[0].is_list()) throw Failure{"intervals takes one list of [a, b] pairs"};
    for (const auto& item : std::get<List>(c.args[0].v)) {
      const auto pair = number_list(item, "interval");
      if (pair.size() != 2) throw Failure{"each interval needs exactly two endpoints"};
      set.push_back({pair[0], pair[1]});
    }
    auto s = SpectralFunction::intervals(std::move(set));
    decl = s.describe();
    return s;
  }
  if (c.name == "named") {
    if (c.args.empty()) throw Failure{"named(...) needs a family name"};
    const std::string fam = text_of(c.args[0]);
    SpectralFunction s = SpectralFunction::triangle();
    if (fam == "sine") {
      check_kwargs(c, {"rho"});
      s = SpectralFunction::sine(arg_number(c, 1, "rho", 0.5));
    } else if (fam == "triangle") {
      check_kwargs(c, {});
    } else if (fam == "flat") {
      check_kwargs(c, {"value"});
      s = SpectralFunction::flat(arg_number(c, 1, "value", 0.5));
    } else if (fam == "scaled_beta_union") {
      check_kwargs(c, {"beta", "n_max"});
      const double nmax = arg_number(c, 2, "n_max", 64.0);
      if (nmax != std::floor(nmax)) throw Failure{"n_max must be an integer"};
      s = SpectralFunction::scaled_beta_union(arg_number(c, 1, "beta", 2.0), static_cast<int>(nmax));
    } else {
      throw Failure{"unknown family '" + fam + "'"};
    }
    decl = s.describe();
    return s;
  }
  throw Failure{"unknown spectral form '" + c.name + "'"};
}

TestFunction statistic_from(const Value& v) {
  if (!v.is_call()) throw Failure{"expected indicator(...), gaussian(...), bump(...) or step_combo(...)"};
  const Call& c = std::get<Call>(v.v);
  if (c.name == "indicator") {
    check_kwargs(c, {"a", "b"});
    return TestFunction::indicator(arg_number(c, 0, "a", std::nullopt), arg_number(c, 1, "b", std::nullopt));
  }
  if (c.name == "gaussian" || c.name == "bump") {
    check_kwargs(c, {"center", "width"});
    const double center = arg_number(c, 0, "center", std::nullopt);
    const double width = arg_number(c, 1, "width", std::nullopt);
    return c.name == "gaussian" ? TestFunction::gaussian(center, width) : TestFunction::bump(center, width);
  }
  if (c.name == "step_combo") {
    if (c.args.size() != 1 || !c.args[0].is_list()) throw Failure{"step_combo takes one list of [alpha, a, b]"};
    std::vector<StepTerm> terms;
    for (const auto& item : std::get<List>(c.args[0].v)) {
      const auto t = number_list(item, "step term");
      if (t.size() != 3) throw Failure{"each step term is [alpha, a, b]"};
      terms.push_back({t[0], t[1], t[2]});
    }
    return TestFunction::step_combo(std::move(terms));
  }
  throw Failure{"unknown test function '" + c.name + "'"};
}

PerturbationSpec perturbation_from(const Value& v) {
  PerturbationSpec p;
  if (v.is_ident() && v.ident == "none") return p;
  if (!v.is_call() || std::get<Call>(v.v).name != "rank_one_damping") {
    throw Failure{"expected none or rank_one_damping(epsilon=..., width=...)"};
  }
  const Call& c = std::get<Call>(v.v);
  check_kwargs(c, {"epsilon", "width"});
  p.enabled = true;
  p.epsilon = arg_number(c, 0, "epsilon", std::nullopt);
  p.width = arg_number(c, 1, "width", 1.0);
  return p;
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

SpectralFunction load_spectral_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedSpectral, "cannot open " + path.string());
  std::vector<double> freq, val;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::MalformedSpectral, path.string() + ":" + std::to_string(lineno) + ": need two columns");
    }
    const std::string a = trim(line.substr(0, comma)), b = trim(line.substr(comma + 1));
    double x = 0.0, y = 0.0;
    const auto ra = std::from_chars(a.data(), a.data() + a.size(), x);
    const auto rb = std::from_chars(b.data(), b.data() + b.size(), y);
    const bool ok = ra.ec == std::errc() && rb.ec == std::errc() && ra.ptr == a.data() + a.size() &&
                    rb.ptr == b.data() + b.size();
    if (!ok) {
      if (freq.empty()) continue;  // header row
      throw Error(ErrorCode::MalformedSpectral, path.string() + ":" + std::to_string(lineno) + ": not numeric");
    }
    freq.push_back(x);
    val.push_back(y);
  }
  return SpectralFunction::tabulated(std::move(freq), std::move(val));
}

ParsedConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ParsedConfig out;
  out.hash = fnv1a64(text);
  out.spec.L_grid.clear();

  std::vector<std::string> parse_errors, validation_errors;
  std::map<std::string, int> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  bool have_spectral = false;

  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) {
      parse_errors.push_back(where + "expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string rhs = trim(line.substr(eq + 1));
    if (seen.count(key)) {
      parse_errors.push_back(where + key + ": duplicate key (first set on line " + std::to_string(seen[key]) + ")");
      continue;
    }
    seen[key] = lineno;

    Value v;
    try {
      v = Parser(rhs).parse_all();
    } catch (const Failure& f) {
      parse_errors.push_back(where + key + ": " + f.what);
      continue;
    }

    try {
      auto& s = out.spec;
      if (key == "kernel.spectral") {
        s.kernel = spectral_from(v, base_dir, out.kernel_decl);
        have_spectral = true;
      } else if (key == "kernel.n_sites") {
        s.n_sites = integer(v, key);
        if (s.n_sites < 2) throw Failure{"must be at least 2"};
      } else if (key == "kernel.perturbation") {
        s.perturbation = perturbation_from(v);
      } else if (key == "statistic.function") {
        s.statistic = statistic_from(v);
        out.statistic_decl = s.statistic.describe();
      } else if (key == "grid.L") {
        s.L_grid = grid_values(v, key);
      } else if (key == "grid.window_factor") {
        s.window_factor = number(v, key);
      } else if (key == "grid.lambda") {
        s.lambda_grid = grid_values(v, key);
      } else if (key == "mc.n_samples") {
        const long n = integer(v, key);
        if (n < 0) throw Failure{"must be nonnegative"};
        s.n_samples = static_cast<std::size_t>(n);
      } else if (key == "mc.seed") {
        const long n = integer(v, key);
        if (n < 0) throw Failure{"must be nonnegative"};
        s.seed = static_cast<std::uint64_t>(n);
      } else if (key == "mc.max_L") {
        s.mc_max_L = number(v, key);
      } else if (key == "stats.cumulant_order") {
        s.cumulant_order = static_cast<int>(integer(v, key));
      } else if (key == "scan.method") {
        const std::string m = text_of(v);
        if (m == "lattice") {
          s.scan_method = ExperimentSpec::ScanMethod::lattice;
        } else if (m == "spectral") {
          s.scan_method = ExperimentSpec::ScanMethod::spectral;
        } else {
          throw Failure{"expected lattice or spectral"};
        }
      } else {
        validation_errors.push_back(where + key + ": unknown key");
      }
    } catch (const Failure& f) {
      validation_errors.push_back(where + key + ": " + f.what);
    } catch (const Error& e) {
      validation_errors.push_back(where + key + ": " + e.what());
    }
  }

  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& e : v) s += (s.empty() ? "" : "\n") + e;
    return s;
  };
  if (!parse_errors.empty()) {
    std::vector<std::string> all = parse_errors;
    all.insert(all.end(), validation_errors.begin(), validation_errors.end());
    throw Error(ErrorCode::ParseError, join(all));
  }
  if (!have_spectral) validation_errors.push_back("kernel.spectral: missing");
  if (out.spec.L_grid.empty()) validation_errors.push_back("grid.L: missing");
  if (validation_errors.empty()) {
    try {
      validate_spec(out.spec);
    } catch (const Error& e) {
      std::string msg = e.what();
      const std::string prefix = "ValidationError: ";
      if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
      const auto colon = msg.find(':');
      const std::string key = colon == std::string::npos ? "" : msg.substr(0, colon);
      validation_errors.push_back((seen.count(key) ? "line " + std::to_string(seen[key]) + ": " : "") + msg);
    }
  }
  if (!validation_errors.empty()) throw Error(ErrorCode::ValidationError, join(validation_errors));
  return out;
}

ParsedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

}  // namespace dpp
