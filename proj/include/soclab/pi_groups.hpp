#pragma once

// Buckingham-Pi analysis: dimensionless monomial groups of a variable table,
// computed exactly as the integer nullspace of the dimension-exponent matrix.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "soclab/rational.hpp"

namespace soclab {

/// Raised for malformed variable tables and dimension strings.
class TableError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Exponent vector over named base dimensions. Zero exponents are never
/// stored, so an empty map is a dimensionless quantity.
struct Dimension {
  std::map<std::string, Rational> exponents;

  bool dimensionless() const { return exponents.empty(); }

  Rational operator[](const std::string& base) const {
    const auto it = exponents.find(base);
    return it == exponents.end() ? Rational(0) : it->second;
  }

  void add(const std::string& base, const Rational& e) {
    auto& slot = exponents[base];
    slot += e;
    if (slot.is_zero()) exponents.erase(base);
  }

  std::string to_string() const {
    if (exponents.empty()) return "1";
    std::string s;
    for (const auto& [base, e] : exponents) {
      if (!s.empty()) s += ' ';
      s += base + "^" + e.to_string();
    }
    return s;
  }

  friend bool operator==(const Dimension&, const Dimension&) = default;

  /// Parses products such as "L^2 T^-1", "S*T^-1", "L", or "1" (dimensionless).
  /// Factors may be separated by spaces or '*'; exponents may be rational.
  static Dimension parse(const std::string& text) {
    Dimension d;
    std::string normalized = text;
    std::replace(normalized.begin(), normalized.end(), '*', ' ');
    std::istringstream in(normalized);
    std::string factor;
    while (in >> factor) {
      if (factor == "1" || factor == "-") continue;
      const auto caret = factor.find('^');
      const std::string base = factor.substr(0, caret);
      if (base.empty() || !std::isalpha(static_cast<unsigned char>(base[0])))
        throw TableError("bad base dimension in '" + text + "'");
      Rational e(1);
      if (caret != std::string::npos) {
        try {
          e = Rational::parse(factor.substr(caret + 1));
        } catch (const std::invalid_argument&) {
          throw TableError("bad exponent in '" + text + "'");
        }
      }
      d.add(base, e);
    }
    return d;
  }
};

struct DimensionedVariable {
  std::string name;
  Dimension dimension;
  std::string description;
};

/// Monomial prod(var^exponent). `exponents` is keyed by variable name; the
/// canonical ordering used for display and sign follows the source table.
struct PiGroup {
  std::vector<std::pair<std::string, Rational>> exponents;  // table order, zeros omitted
  std::optional<std::string> label;

  Rational exponent_of(const std::string& name) const {
    for (const auto& [n, e] : exponents)
      if (n == name) return e;
    return Rational(0);
  }

  /// "U^1 L0^1 nu^-1" style product in table order.
  std::string to_string() const {
    std::string s;
    for (const auto& [name, e] : exponents) {
      if (!s.empty()) s += ' ';
      s += name + "^" + e.to_string();
    }
    return s.empty() ? "1" : s;
  }

  friend bool operator==(const PiGroup& a, const PiGroup& b) { return a.exponents == b.exponents; }
};

/// A table of variables plus the declared base dimensions. When no base set
/// was declared it is the union of the bases the variables use.
class VariableTable {
public:
  VariableTable() = default;
  explicit VariableTable(std::vector<DimensionedVariable> vars,
                         std::optional<std::vector<std::string>> declared_bases = std::nullopt)
      : variables_(std::move(vars)), declared_(std::move(declared_bases)) {
    validate();
  }

  const std::vector<DimensionedVariable>& variables() const { return variables_; }
  std::size_t size() const { return variables_.size(); }
  bool empty() const { return variables_.empty(); }

  std::vector<std::string> bases() const {
    if (declared_) return *declared_;
    std::set<std::string> seen;
    for (const auto& v : variables_)
      for (const auto& [b, e] : v.dimension.exponents) seen.insert(b);
    return {seen.begin(), seen.end()};
  }

  /// Reads the plain-text table format:
  ///
  ///   # comment
  ///   @dimensions L T          (optional)
  ///   U   | L T^-1  | bulk flow speed
  ///
  static VariableTable read(std::istream& in) {
    std::vector<DimensionedVariable> vars;
    std::optional<std::vector<std::string>> declared;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      if (body.rfind("@dimensions", 0) == 0) {
        std::istringstream names(body.substr(11));
        std::vector<std::string> list;
        for (std::string b; names >> b;) list.push_back(b);
        declared = list;
        continue;
      }
      const auto p1 = body.find('|');
      if (p1 == std::string::npos)
        throw TableError("line " + std::to_string(lineno) + ": expected 'name | dimension | description'");
      const auto p2 = body.find('|', p1 + 1);
      DimensionedVariable v;
      v.name = trim(body.substr(0, p1));
      const std::string dim = p2 == std::string::npos ? body.substr(p1 + 1) : body.substr(p1 + 1, p2 - p1 - 1);
      v.description = p2 == std::string::npos ? "" : trim(body.substr(p2 + 1));
      try {
        v.dimension = Dimension::parse(trim(dim));
      } catch (const TableError& e) {
        throw TableError("line " + std::to_string(lineno) + ": " + e.what());
      }
      vars.push_back(std::move(v));
    }
    return VariableTable(std::move(vars), std::move(declared));
  }

  static VariableTable read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TableError("cannot open table '" + path + "'");
    return read(in);
  }

private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  void validate() const {
    std::set<std::string> names;
    for (const auto& v : variables_) {
      if (v.name.empty()) throw TableError("variable with empty name");
      if (!names.insert(v.name).second) throw TableError("duplicate variable '" + v.name + "'");
    }
    if (declared_) {
      std::set<std::string> bases;
      for (const auto& b : *declared_) {
        if (b.empty()) throw TableError("empty base dimension name");
        if (!bases.insert(b).second) throw TableError("duplicate base dimension '" + b + "'");
      }
      for (const auto& v : variables_)
        for (const auto& [b, e] : v.dimension.exponents)
          if (!bases.count(b))
            throw TableError("variable '" + v.name + "' uses undeclared dimension '" + b + "'");
    }
  }

  std::vector<DimensionedVariable> variables_;
  std::optional<std::vector<std::string>> declared_;
};

namespace detail {

using RationalMatrix = std::vector<std::vector<Rational>>;

/// In-place reduced row echelon form; returns pivot columns in order.
inline std::vector<std::size_t> reduce_rows(RationalMatrix& m, std::size_t cols) {
  std::vector<std::size_t> pivots;
  std::size_t row = 0;
  for (std::size_t c = 0; c < cols && row < m.size(); ++c) {
    std::size_t p = row;
    while (p < m.size() && m[p][c].is_zero()) ++p;
    if (p == m.size()) continue;
    std::swap(m[p], m[row]);
    const Rational inv = Rational(1) / m[row][c];
    for (auto& x : m[row]) x *= inv;
    for (std::size_t r = 0; r < m.size(); ++r) {
      if (r == row || m[r][c].is_zero()) continue;
      const Rational f = m[r][c];
      for (std::size_t k = 0; k < cols; ++k) m[r][k] -= f * m[row][k];
    }
    pivots.push_back(c);
    ++row;
  }
  return pivots;
}

inline std::int64_t gcd64(std::int64_t a, std::int64_t b) {
  return std::gcd(a < 0 ? -a : a, b < 0 ? -b : b);
}

inline std::int64_t lcm64(std::int64_t a, std::int64_t b) {
  const Rational r = Rational(a / gcd64(a, b)) * Rational(b);  // overflow-checked
  return r.num();
}

/// Scales to coprime integers with the first nonzero entry positive.
inline std::vector<Rational> canonical_integer_vector(std::vector<Rational> v) {
  std::int64_t den = 1;
  for (const auto& x : v) den = lcm64(den, x.den());
  std::int64_t g = 0;
  for (auto& x : v) {
    x *= Rational(den);
    g = gcd64(g, x.num());
  }
  if (g == 0) return v;
  std::int64_t sign = 1;
  for (const auto& x : v)
    if (!x.is_zero()) {
      sign = x.num() < 0 ? -1 : 1;
      break;
    }
  for (auto& x : v) x = Rational(x.num() / g * sign);
  return v;
}

}  // namespace detail

/// W x V exponent matrix: rows are base dimensions (as listed by
/// table.bases()), columns are variables in table order.
inline detail::RationalMatrix dimension_matrix(const VariableTable& table) {
  const auto bases = table.bases();
  detail::RationalMatrix m(bases.size(), std::vector<Rational>(table.size()));
  for (std::size_t r = 0; r < bases.size(); ++r)
    for (std::size_t c = 0; c < table.size(); ++c) m[r][c] = table.variables()[c].dimension[bases[r]];
  return m;
}

inline std::size_t dimension_rank(const VariableTable& table) {
  auto m = dimension_matrix(table);
  return detail::reduce_rows(m, table.size()).size();
}

/// All dimensionless groups of the table: a basis of the integer nullspace of
/// the exponent matrix, M = V - rank groups.
///
/// The basis comes from the reduced echelon form with pivots taken in table
/// order; each free variable yields one group with that variable at exponent
/// one. Groups are then made coprime-integer with the first nonzero exponent
/// (in table order) positive, and sorted lexicographically by exponent vector.
inline std::vector<PiGroup> compute_pi_groups(const VariableTable& table) {
  if (table.empty()) throw TableError("no variables");
  const std::size_t v = table.size();
  auto m = dimension_matrix(table);
  const auto pivots = detail::reduce_rows(m, v);

  std::vector<bool> is_pivot(v, false);
  for (auto c : pivots) is_pivot[c] = true;

  std::vector<std::vector<Rational>> basis;
  for (std::size_t f = 0; f < v; ++f) {
    if (is_pivot[f]) continue;
    std::vector<Rational> x(v, Rational(0));
    x[f] = Rational(1);
    for (std::size_t r = 0; r < pivots.size(); ++r) x[pivots[r]] = -m[r][f];
    basis.push_back(detail::canonical_integer_vector(std::move(x)));
  }
  std::sort(basis.begin(), basis.end());

  std::vector<PiGroup> groups;
  groups.reserve(basis.size());
  for (const auto& x : basis) {
    PiGroup g;
    for (std::size_t c = 0; c < v; ++c)
      if (!x[c].is_zero()) g.exponents.emplace_back(table.variables()[c].name, x[c]);
    groups.push_back(std::move(g));
  }
  return groups;
}

/// Brings an arbitrary monomial (e.g. a hand-written h/eps) into the same
/// canonical form compute_pi_groups uses for `table`.
inline PiGroup canonicalize(const PiGroup& group, const VariableTable& table) {
  std::vector<Rational> x(table.size(), Rational(0));
  for (const auto& [name, e] : group.exponents) {
    bool found = false;
    for (std::size_t c = 0; c < table.size(); ++c)
      if (table.variables()[c].name == name) {
        x[c] += e;
        found = true;
      }
    if (!found) throw TableError("group refers to unknown variable '" + name + "'");
  }
  x = detail::canonical_integer_vector(std::move(x));
  PiGroup out;
  out.label = group.label;
  for (std::size_t c = 0; c < table.size(); ++c)
    if (!x[c].is_zero()) out.exponents.emplace_back(table.variables()[c].name, x[c]);
  return out;
}

/// Dimension induced by a group: sum of exponent * variable dimension.
inline Dimension induced_dimension(const PiGroup& group, const VariableTable& table) {
  Dimension d;
  for (const auto& [name, e] : group.exponents) {
    const auto it = std::find_if(table.variables().begin(), table.variables().end(),
                                 [&](const DimensionedVariable& v) { return v.name == name; });
    if (it == table.variables().end()) throw TableError("group refers to unknown variable '" + name + "'");
    for (const auto& [b, k] : it->dimension.exponents) d.add(b, k * e);
  }
  return d;
}

}  // namespace soclab
