#pragma once

// A closed grammar of bounded test functions psi(v, x) on phase space:
//
//   expr := prod ('+' prod)*
//   prod := term ('*' term)*
//   term := number ['*' term]                  Const, or Scale when followed by '*'
//         | 'ind(v:' interval ';x:' box ')'    indicator of annulus x box
//         | 'vnorm^' int                        |v|^p
//         | 'lin(' number (',' number)* ')'     <h, v>
//         | 'xbox(' box ')'                     indicator of the position box
//         | '(' expr ')'
//   box  := interval ('x' interval)*            one interval per axis
//   interval := '[' number ',' number ']'
//
// Whitespace is insignificant and numbers are plain decimals (no exponent).

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "conelab/config_core.hpp"
#include "conelab/error.hpp"
#include "conelab/intensity.hpp"
#include "conelab/numeric.hpp"
#include "conelab/vector.hpp"

namespace conelab {

class FunctionSpec;

namespace fn {

struct Const {
  double value;
  bool operator==(const Const&) const = default;
};
struct IndicatorPhase {
  MarkAnnulus marks;
  PositionWindow window;
  bool operator==(const IndicatorPhase&) const = default;
};
struct RadialMark {
  int power;
  bool operator==(const RadialMark&) const = default;
};
struct LinearMark {
  RealVector h;
  bool operator==(const LinearMark&) const = default;
};
struct PositionBump {
  PositionWindow window;
  bool operator==(const PositionBump&) const = default;
};
struct Sum;
struct Product;
struct Scale;

}  // namespace fn

/// Immutable expression tree; copies share structure.
class FunctionSpec {
 public:
  using Node = std::variant<fn::Const, fn::IndicatorPhase, fn::RadialMark, fn::LinearMark, fn::PositionBump,
                            fn::Sum, fn::Product, fn::Scale>;

  FunctionSpec();
  template <class T>
    requires(!std::is_same_v<std::remove_cvref_t<T>, FunctionSpec>)
  FunctionSpec(T node);  // NOLINT(google-explicit-constructor)

  const Node& node() const;
  bool operator==(const FunctionSpec& other) const;

 private:
  std::shared_ptr<const Node> node_;
};

namespace fn {

struct Sum {
  FunctionSpec lhs, rhs;
  bool operator==(const Sum&) const = default;
};
struct Product {
  FunctionSpec lhs, rhs;
  bool operator==(const Product&) const = default;
};
struct Scale {
  double factor;
  FunctionSpec arg;
  bool operator==(const Scale&) const = default;
};

}  // namespace fn

inline FunctionSpec::FunctionSpec() : FunctionSpec(fn::Const{0.0}) {}

inline const FunctionSpec::Node& FunctionSpec::node() const { return *node_; }

template <class T>
  requires(!std::is_same_v<std::remove_cvref_t<T>, FunctionSpec>)
FunctionSpec::FunctionSpec(T node) : node_(std::make_shared<const Node>(std::move(node))) {}

inline bool FunctionSpec::operator==(const FunctionSpec& other) const {
  return node_ == other.node_ || *node_ == *other.node_;
}

// Builders.
inline FunctionSpec constant(double c) { return fn::Const{c}; }
inline FunctionSpec indicator(MarkAnnulus marks, PositionWindow window) {
  return fn::IndicatorPhase{marks, std::move(window)};
}
inline FunctionSpec radial_mark(int power) { return fn::RadialMark{power}; }
inline FunctionSpec linear_mark(RealVector h) { return fn::LinearMark{std::move(h)}; }
inline FunctionSpec position_bump(PositionWindow window) { return fn::PositionBump{std::move(window)}; }
inline FunctionSpec operator+(FunctionSpec a, FunctionSpec b) { return fn::Sum{std::move(a), std::move(b)}; }
inline FunctionSpec operator*(FunctionSpec a, FunctionSpec b) { return fn::Product{std::move(a), std::move(b)}; }
inline FunctionSpec operator*(double c, FunctionSpec a) { return fn::Scale{c, std::move(a)}; }

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

inline double evaluate(const FunctionSpec& f, std::span<const double> v, std::span<const double> x) {
  return std::visit(
      Overloaded{
          [](const fn::Const& n) { return n.value; },
          [&](const fn::IndicatorPhase& n) { return (n.marks.contains(v) && n.window.contains(x)) ? 1.0 : 0.0; },
          [&](const fn::RadialMark& n) { return n.power == 0 ? 1.0 : std::pow(norm(v), n.power); },
          [&](const fn::LinearMark& n) { return dot(n.h, v); },
          [&](const fn::PositionBump& n) { return n.window.contains(x) ? 1.0 : 0.0; },
          [&](const fn::Sum& n) { return evaluate(n.lhs, v, x) + evaluate(n.rhs, v, x); },
          [&](const fn::Product& n) { return evaluate(n.lhs, v, x) * evaluate(n.rhs, v, x); },
          [&](const fn::Scale& n) { return n.factor * evaluate(n.arg, v, x); },
      },
      f.node());
}

inline double evaluate(const FunctionSpec& f, const MarkedPoint& p) { return evaluate(f, p.velocity, p.position); }

/// True if any leaf reads the velocity.
inline bool depends_on_velocity(const FunctionSpec& f) {
  return std::visit(Overloaded{
                        [](const fn::Const&) { return false; },
                        [](const fn::IndicatorPhase&) { return true; },
                        [](const fn::RadialMark& n) { return n.power != 0; },
                        [](const fn::LinearMark&) { return true; },
                        [](const fn::PositionBump&) { return false; },
                        [](const fn::Sum& n) { return depends_on_velocity(n.lhs) || depends_on_velocity(n.rhs); },
                        [](const fn::Product& n) { return depends_on_velocity(n.lhs) || depends_on_velocity(n.rhs); },
                        [](const fn::Scale& n) { return depends_on_velocity(n.arg); },
                    },
                    f.node());
}

/// True if any leaf depends on the direction of v (not only on |v|).
inline bool depends_on_direction(const FunctionSpec& f) {
  return std::visit(Overloaded{
                        [](const fn::LinearMark&) { return true; },
                        [](const fn::Sum& n) { return depends_on_direction(n.lhs) || depends_on_direction(n.rhs); },
                        [](const fn::Product& n) { return depends_on_direction(n.lhs) || depends_on_direction(n.rhs); },
                        [](const fn::Scale& n) { return depends_on_direction(n.arg); },
                        [](const auto&) { return false; },
                    },
                    f.node());
}

/// Evaluate a velocity-independent function at a position.
inline double evaluate_position(const FunctionSpec& f, std::span<const double> x) {
  const RealVector unit_v = [&] {
    RealVector v(x.size(), 0.0);
    if (!v.empty()) v[0] = 1.0;
    return v;
  }();
  return evaluate(f, unit_v, x);
}

/// Throws InvalidArgument if a vector or box in f has a dimension other than d.
inline void check_dimension(const FunctionSpec& f, int d) {
  const auto dim = static_cast<std::size_t>(d);
  std::visit(Overloaded{
                 [&](const fn::IndicatorPhase& n) {
                   require(n.window.dimension() == d, ErrorCode::InvalidArgument, "indicator box dimension mismatch");
                 },
                 [&](const fn::LinearMark& n) {
                   require(n.h.size() == dim, ErrorCode::InvalidArgument, "lin() vector dimension mismatch");
                 },
                 [&](const fn::PositionBump& n) {
                   require(n.window.dimension() == d, ErrorCode::InvalidArgument, "xbox dimension mismatch");
                 },
                 [&](const fn::Sum& n) {
                   check_dimension(n.lhs, d);
                   check_dimension(n.rhs, d);
                 },
                 [&](const fn::Product& n) {
                   check_dimension(n.lhs, d);
                   check_dimension(n.rhs, d);
                 },
                 [&](const fn::Scale& n) { check_dimension(n.arg, d); },
                 [](const auto&) {},
             },
             f.node());
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline std::string render_decimal(double x) {
  char buf[512];
  auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed);
  return std::string(buf, res.ptr);
}

inline std::string render_interval(double lo, double hi) {
  return "[" + render_decimal(lo) + "," + render_decimal(hi) + "]";
}

inline std::string render_box(const PositionWindow& w) {
  std::string s;
  for (int i = 0; i < w.dimension(); ++i) {
    if (i) s += "x";
    s += render_interval(w.lower()[i], w.upper()[i]);
  }
  return s;
}

inline bool is_composite(const FunctionSpec& f) {
  return std::holds_alternative<fn::Sum>(f.node()) || std::holds_alternative<fn::Product>(f.node()) ||
         std::holds_alternative<fn::Scale>(f.node());
}

}  // namespace detail

std::string render(const FunctionSpec& f);

namespace detail {

inline std::string render_child(const FunctionSpec& f, bool left_of_product = false) {
  const bool wrap = is_composite(f) || (left_of_product && std::holds_alternative<fn::Const>(f.node()));
  return wrap ? "(" + render(f) + ")" : render(f);
}

}  // namespace detail

/// Text form that parses back to a structurally equal tree.
inline std::string render(const FunctionSpec& f) {
  return std::visit(
      Overloaded{
          [](const fn::Const& n) { return detail::render_decimal(n.value); },
          [](const fn::IndicatorPhase& n) {
            return "ind(v:" + detail::render_interval(n.marks.eps(), n.marks.rmax()) +
                   ";x:" + detail::render_box(n.window) + ")";
          },
          [](const fn::RadialMark& n) { return "vnorm^" + std::to_string(n.power); },
          [](const fn::LinearMark& n) {
            std::string s = "lin(";
            for (std::size_t i = 0; i < n.h.size(); ++i) s += (i ? "," : "") + detail::render_decimal(n.h[i]);
            return s + ")";
          },
          [](const fn::PositionBump& n) { return "xbox(" + detail::render_box(n.window) + ")"; },
          [](const fn::Sum& n) { return detail::render_child(n.lhs) + "+" + detail::render_child(n.rhs); },
          [](const fn::Product& n) {
            return detail::render_child(n.lhs, true) + "*" + detail::render_child(n.rhs);
          },
          [](const fn::Scale& n) { return detail::render_decimal(n.factor) + "*" + detail::render_child(n.arg); },
      },
      f.node());
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  FunctionSpec parse() {
    auto f = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw SyntaxError(ErrorCode::SyntaxError, pos_, what); }
  [[noreturn]] void fail_at(std::size_t at, const std::string& what) const {
    throw SyntaxError(ErrorCode::SyntaxError, at, what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) {
      if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' but input ended");
      fail(std::string("expected '") + c + "'");
    }
    ++pos_;
  }

  bool at_number() {
    skip_ws();
    if (pos_ >= text_.size()) return false;
    const char c = text_[pos_];
    return std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.';
  }

  double number() {
    skip_ws();
    const std::size_t start = pos_;
    if (pos_ < text_.size() && text_[pos_] == '-') ++pos_;
    std::size_t digits = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_, ++digits;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_, ++digits;
    }
    if (digits == 0) fail_at(start, "expected a decimal number");
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value, std::chars_format::fixed);
    if (ec != std::errc{} || ptr != text_.data() + pos_) fail_at(start, "malformed number");
    return value;
  }

  int integer() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected a non-negative integer");
    int value = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (ec != std::errc{}) fail_at(start, "integer out of range");
    return value;
  }

  std::pair<double, double> interval() {
    expect('[');
    const double lo = number();
    expect(',');
    const double hi = number();
    expect(']');
    return {lo, hi};
  }

  PositionWindow box() {
    const std::size_t start = (skip_ws(), pos_);
    RealVector lower, upper;
    while (true) {
      auto [lo, hi] = interval();
      lower.push_back(lo);
      upper.push_back(hi);
      if (!peek('x')) break;
      ++pos_;
    }
    try {
      return PositionWindow(lower, upper);
    } catch (const Error& e) {
      fail_at(start, "invalid box: lower must not exceed upper");
    }
  }

  std::string identifier() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  void keyword(std::string_view word) {
    const std::size_t start = (skip_ws(), pos_);
    if (identifier() != word) fail_at(start, "expected '" + std::string(word) + "'");
  }

  FunctionSpec expr() {
    FunctionSpec f = prod();
    while (peek('+')) {
      ++pos_;
      f = fn::Sum{f, prod()};
    }
    return f;
  }

  FunctionSpec prod() {
    FunctionSpec f = term();
    while (peek('*')) {
      ++pos_;
      f = fn::Product{f, term()};
    }
    return f;
  }

  FunctionSpec term() {
    skip_ws();
    if (pos_ >= text_.size()) fail("expected a term but input ended");
    if (at_number()) {
      const double c = number();
      if (peek('*')) {
        ++pos_;
        return fn::Scale{c, term()};
      }
      return fn::Const{c};
    }
    if (peek('(')) {
      ++pos_;
      FunctionSpec f = expr();
      expect(')');
      return f;
    }
    const std::size_t start = pos_;
    const std::string name = identifier();
    if (name.empty()) fail("expected a term");
    if (name == "ind") {
      expect('(');
      keyword("v");
      expect(':');
      const std::size_t iv = (skip_ws(), pos_);
      auto [lo, hi] = interval();
      if (!(lo > 0.0 && lo <= hi)) fail_at(iv, "mark interval must satisfy 0 < lo <= hi");
      expect(';');
      keyword("x");
      expect(':');
      PositionWindow w = box();
      expect(')');
      return fn::IndicatorPhase{MarkAnnulus(lo, hi), std::move(w)};
    }
    if (name == "vnorm") {
      expect('^');
      return fn::RadialMark{integer()};
    }
    if (name == "lin") {
      expect('(');
      RealVector h{number()};
      while (peek(',')) {
        ++pos_;
        h.push_back(number());
      }
      expect(')');
      return fn::LinearMark{std::move(h)};
    }
    if (name == "xbox") {
      expect('(');
      PositionWindow w = box();
      expect(')');
      return fn::PositionBump{std::move(w)};
    }
    throw SyntaxError(ErrorCode::UnknownSymbol, start, "unknown symbol '" + name + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parse the grammar above. Throws SyntaxError (code SyntaxError or UnknownSymbol) with a byte offset.
inline FunctionSpec parse_function(std::string_view text) { return detail::Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Integration against sigma

/// Where a phase integrand may be discontinuous, and whether it depends on direction.
struct PhaseStructure {
  std::vector<std::vector<double>> x_breaks;  // per axis
  std::vector<double> r_breaks;
  bool directional = false;
};

namespace detail {

inline void collect_structure(const FunctionSpec& f, PhaseStructure& s) {
  auto add_box = [&](const PositionWindow& w) {
    for (int i = 0; i < w.dimension() && i < static_cast<int>(s.x_breaks.size()); ++i) {
      s.x_breaks[i].push_back(w.lower()[i]);
      s.x_breaks[i].push_back(w.upper()[i]);
    }
  };
  std::visit(Overloaded{
                 [&](const fn::IndicatorPhase& n) {
                   add_box(n.window);
                   s.r_breaks.push_back(n.marks.eps());
                   s.r_breaks.push_back(n.marks.rmax());
                 },
                 [&](const fn::LinearMark&) { s.directional = true; },
                 [&](const fn::PositionBump& n) { add_box(n.window); },
                 [&](const fn::Sum& n) {
                   collect_structure(n.lhs, s);
                   collect_structure(n.rhs, s);
                 },
                 [&](const fn::Product& n) {
                   collect_structure(n.lhs, s);
                   collect_structure(n.rhs, s);
                 },
                 [&](const fn::Scale& n) { collect_structure(n.arg, s); },
                 [](const auto&) {},
             },
             f.node());
}

inline std::vector<double> clip_breaks(std::vector<double> breaks, double lo, double hi) {
  breaks.push_back(lo);
  breaks.push_back(hi);
  std::vector<double> out;
  for (double b : breaks) {
    if (b >= lo && b <= hi) out.push_back(b);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct DirectionRule {
  std::vector<RealVector> directions;
  std::vector<double> weights;
};

inline DirectionRule direction_rule(int d, const MarkAnnulus& marks, bool directional) {
  DirectionRule rule;
  if (!directional) {
    RealVector e1(d, 0.0);
    e1[0] = 1.0;
    rule.directions.push_back(e1);
    rule.weights.push_back(angular_mass(d, marks));
    return rule;
  }
  if (d == 1) {
    rule.directions.push_back({1.0});
    rule.weights.push_back(1.0);
    if (!marks.one_sided()) {
      rule.directions.push_back({-1.0});
      rule.weights.push_back(1.0);
    }
    return rule;
  }
  constexpr int kAzimuth = 64;
  if (d == 2) {
    if (!marks.one_sided()) {
      for (int i = 0; i < kAzimuth; ++i) {
        const double a = 2.0 * std::numbers::pi * i / kAzimuth;
        rule.directions.push_back({std::cos(a), std::sin(a)});
        rule.weights.push_back(2.0 * std::numbers::pi / kAzimuth);
      }
    } else {
      const auto gl = gauss_legendre(kAzimuth);
      for (int i = 0; i < kAzimuth; ++i) {
        const double a = 0.5 * std::numbers::pi * gl.nodes[i];
        rule.directions.push_back({std::cos(a), std::sin(a)});
        rule.weights.push_back(0.5 * std::numbers::pi * gl.weights[i]);
      }
    }
    return rule;
  }
  if (d == 3) {
    // Polar axis along e1 so that the one-sided half-space is t = cos(theta) > 0.
    const auto gl = gauss_legendre(48);
    const double t_lo = marks.one_sided() ? 0.0 : -1.0;
    const double half = 0.5 * (1.0 - t_lo);
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double t = t_lo + half * (gl.nodes[i] + 1.0);
      const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
      for (int j = 0; j < kAzimuth; ++j) {
        const double a = 2.0 * std::numbers::pi * j / kAzimuth;
        rule.directions.push_back({t, s * std::cos(a), s * std::sin(a)});
        rule.weights.push_back(half * gl.weights[i] * 2.0 * std::numbers::pi / kAzimuth);
      }
    }
    return rule;
  }
  throw Error(ErrorCode::QuadratureFailure, "direction-dependent integrands are supported only for d <= 3");
}

}  // namespace detail

inline PhaseStructure structure_of(const FunctionSpec& f, int d) {
  PhaseStructure s;
  s.x_breaks.resize(d);
  detail::collect_structure(f, s);
  return s;
}

/// int_{I x Lambda} g(v, x) lambda(dv) m(dx) for g piecewise constant in x on the
/// cells cut by structure.x_breaks and smooth in |v| between structure.r_breaks.
template <class G>
double integrate_phase(const IntensitySpec& sigma, const PhaseStructure& structure, G&& g) {
  const int d = sigma.dimension();
  const auto& win = sigma.window;
  if (win.volume() == 0.0 || sigma.marks.eps() == sigma.marks.rmax()) return 0.0;

  std::vector<std::vector<double>> axes(d);
  for (int i = 0; i < d; ++i) {
    const auto& br = i < static_cast<int>(structure.x_breaks.size()) ? structure.x_breaks[i] : std::vector<double>{};
    axes[i] = detail::clip_breaks(br, win.lower()[i], win.upper()[i]);
  }
  const auto radii = detail::clip_breaks(structure.r_breaks, sigma.marks.eps(), sigma.marks.rmax());
  const auto dirs = detail::direction_rule(d, sigma.marks, structure.directional);

  CompensatedSum total;
  std::vector<std::size_t> cell(d, 0);
  RealVector xc(d), v(d);
  while (true) {
    double vol = 1.0;
    for (int i = 0; i < d; ++i) {
      const double lo = axes[i][cell[i]];
      const double hi = axes[i][cell[i] + 1];
      xc[i] = 0.5 * (lo + hi);
      vol *= hi - lo;
    }
    if (vol > 0.0) {
      auto angular = [&](double r, bool absolute) {
        double s = 0.0;
        for (std::size_t k = 0; k < dirs.directions.size(); ++k) {
          for (int i = 0; i < d; ++i) v[i] = r * dirs.directions[k][i];
          const double term = dirs.weights[k] * g(std::span<const double>(v), std::span<const double>(xc));
          s += absolute ? std::abs(term) : term;
        }
        return s * sigma.law.radial_density(r);
      };
      auto radial = [&](double r) { return angular(r, false); };
      auto radial_abs = [&](double r) { return angular(r, true); };
      for (std::size_t k = 0; k + 1 < radii.size(); ++k) {
        QuadratureOptions opt = kIntensityQuadrature;
        if (dirs.directions.size() > 1) {
          // Directions can cancel to rounding noise, so the tolerance needs the scale of the terms.
          opt.abs_tol = 1e-12 * integrate_adaptive(radial_abs, radii[k], radii[k + 1], {1e-6, 0.0, 4000}).value;
        }
        total.add(vol * integrate_adaptive(radial, radii[k], radii[k + 1], opt).value);
      }
    }
    int axis = 0;
    while (axis < d && ++cell[axis] + 1 >= axes[axis].size()) cell[axis++] = 0;
    if (axis == d) break;
  }
  return total.value();
}

/// int f d(sigma) over the truncated phase window.
inline double integrate_sigma(const FunctionSpec& f, const IntensitySpec& sigma) {
  check_dimension(f, sigma.dimension());
  return integrate_phase(sigma, structure_of(f, sigma.dimension()),
                         [&](std::span<const double> v, std::span<const double> x) { return evaluate(f, v, x); });
}

}  // namespace conelab
