#pragma once

// CSV histories, config fingerprints and run comparison.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcmma/descent.hpp"
#include "gcmma/errors.hpp"
#include "gcmma/fspace.hpp"
#include "gcmma/gcmma.hpp"
#include "gcmma/mesh.hpp"
#include "gcmma/mesh_io.hpp"

namespace gcmma::io {

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Fingerprint of a canonical (key-sorted) JSON config.
inline std::string config_fingerprint(const nlohmann::json& cfg) { return fnv1a_hex(cfg.dump()); }

inline constexpr const char* kFingerprintPrefix = "# config-fingerprint: ";

/// Shortest round-trip decimal form.
inline std::string fmt(double x) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x)
      break;
  }
  return buf;
}

inline void write_descent_csv(std::ostream& out, const descent::History& h,
                              const std::string& fingerprint) {
  out << kFingerprintPrefix << fingerprint << '\n' << "iter,error\n";
  for (const auto& e : h.entries)
    out << e.iter << ',' << fmt(e.error) << '\n';
}

inline std::string history_header(std::size_t m) {
  std::string s = "iter";
  for (std::size_t i = 0; i <= m; ++i)
    s += ",theta" + std::to_string(i);
  s += ",kkt";
  for (std::size_t i = 0; i <= m; ++i)
    s += ",rho" + std::to_string(i);
  s += ",inner_iters";
  return s;
}

inline void write_history_csv(std::ostream& out, const GcmmaResult& res, std::size_t m,
                              const std::string& fingerprint) {
  out << kFingerprintPrefix << fingerprint << '\n' << history_header(m) << '\n';
  for (const auto& r : res.history) {
    out << r.iter;
    for (double t : r.theta)
      out << ',' << fmt(t);
    out << ',' << fmt(r.kkt);
    for (double p : r.rho)
      out << ',' << fmt(p);
    out << ',' << r.inner_iters << '\n';
  }
}

inline void write_design_csv(std::ostream& out, const PrimalField& nu, const PrimalField& nu_hat,
                             const std::string& fingerprint) {
  if (!nu.same_space(nu_hat))
    throw ContractViolation("write_design_csv: fields live on different meshes");
  out << kFingerprintPrefix << fingerprint << '\n' << "element_id,nu,nu_hat\n";
  for (std::size_t e = 0; e < nu.size(); ++e)
    out << e << ',' << fmt(nu[e]) << ',' << fmt(nu_hat[e]) << '\n';
}

/// Parsed CSV: comment lines (leading '#') are collected separately.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> comments;

  [[nodiscard]] std::size_t column(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end())
      throw ContractViolation("csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }

  [[nodiscard]] std::vector<double> values(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
      out.push_back(r[c]);
    return out;
  }

  [[nodiscard]] std::optional<std::string> fingerprint() const {
    const std::string p = kFingerprintPrefix;
    for (const auto& c : comments)
      if (c.rfind(p, 0) == 0)
        return c.substr(p.size());
    return std::nullopt;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(cell);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

inline Table read_csv(std::istream& in, const std::string& source = "<stream>") {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (line[0] == '#') {
      t.comments.push_back(line);
      continue;
    }
    auto cells = split_csv_line(line);
    if (t.columns.empty()) {
      t.columns = std::move(cells);
      continue;
    }
    if (cells.size() != t.columns.size())
      throw ContractViolation(source + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(t.columns.size()) + " cells");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != c.size() || c.empty())
        throw ContractViolation(source + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty())
    throw ContractViolation(source + ": no header row");
  return t;
}

inline Table read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ContractViolation("cannot open '" + path + "'");
  return read_csv(in, path);
}

/// Design coefficients from an `element_id,nu,...` table, in element order.
inline std::vector<double> design_values(const Table& t) {
  const auto ids = t.values("element_id");
  const auto nu = t.values("nu");
  std::vector<double> out(nu.size());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const double id = ids[r];
    if (id < 0 || id >= static_cast<double>(nu.size()) || id != std::floor(id))
      throw ContractViolation("design csv: bad element id " + fmt(id));
    out[static_cast<std::size_t>(id)] = nu[r];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run comparison

inline double relative_difference(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

struct CompareReport {
  std::vector<double> theta0_rel; ///< per common iteration
  double max_theta0_rel = 0.0;
  std::size_t iterations_a = 0, iterations_b = 0;
  std::optional<double> design_distance;          ///< L2 distance of final designs
  std::optional<double> design_relative_distance; ///< divided by the mean of the two L2 norms
};

inline CompareReport compare_histories(const Table& a, const Table& b) {
  CompareReport r;
  const auto ta = a.values("theta0"), tb = b.values("theta0");
  r.iterations_a = ta.size();
  r.iterations_b = tb.size();
  const std::size_t n = std::min(ta.size(), tb.size());
  r.theta0_rel.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    r.theta0_rel[k] = relative_difference(ta[k], tb[k]);
    r.max_theta0_rel = std::max(r.max_theta0_rel, r.theta0_rel[k]);
  }
  return r;
}

/// Relative L2 distance between designs on two meshes of one domain.
inline double relative_l2_distance(double distance, const PrimalField& a, const PrimalField& b) {
  const double scale = 0.5 * (primal_norm(a) + primal_norm(b));
  return scale == 0.0 ? 0.0 : distance / scale;
}

inline void add_design_distance(CompareReport& r, const AnyMesh& ma, const std::vector<double>& a,
                                const AnyMesh& mb, const std::vector<double>& b) {
  if (ma.index() != mb.index())
    throw ContractViolation("compare: meshes have different dimensions");
  const PrimalField fa(element_measures(ma), a);
  const PrimalField fb(element_measures(mb), b);
  const double d = std::visit(
      [&](const auto& x) -> double {
        using M = std::decay_t<decltype(x)>;
        return l2_distance(x, fa, std::get<M>(mb), fb);
      },
      ma);
  r.design_distance = d;
  r.design_relative_distance = relative_l2_distance(d, fa, fb);
}

inline void write_report(std::ostream& out, const CompareReport& r) {
  out << "iterations: " << r.iterations_a << " vs " << r.iterations_b << '\n';
  out << "max_theta0_rel_diff: " << fmt(r.max_theta0_rel) << '\n';
  if (r.design_distance) {
    out << "design_l2_distance: " << fmt(*r.design_distance) << '\n';
    out << "design_rel_l2_distance: " << fmt(*r.design_relative_distance) << '\n';
  }
  out << "iter,theta0_rel_diff\n";
  for (std::size_t k = 0; k < r.theta0_rel.size(); ++k)
    out << k << ',' << fmt(r.theta0_rel[k]) << '\n';
}

} // namespace gcmma::io
