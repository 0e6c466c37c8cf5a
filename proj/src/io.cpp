#include "otdam/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace otdam {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

bool is_scalar(const Json& j) { return !j.is_object() && !j.is_array(); }

void emit(const Json& j, std::ostringstream& out, int depth) {
  const std::string pad(std::size_t(2 * (depth + 1)), ' ');
  const std::string close_pad(std::size_t(2 * depth), ' ');
  if (j.is_number_float()) {
    const double v = j.get<double>();
    out << (std::isfinite(v) ? format_number(v) : "null");
  } else if (is_scalar(j)) {
    out << j.dump();
  } else if (j.is_array()) {
    if (j.empty()) {
      out << "[]";
      return;
    }
    bool flat = true;
    for (const auto& e : j) flat = flat && is_scalar(e);
    if (flat) {
      out << '[';
      for (std::size_t k = 0; k < j.size(); ++k) {
        if (k) out << ", ";
        emit(j[k], out, depth + 1);
      }
      out << ']';
      return;
    }
    out << "[\n";
    for (std::size_t k = 0; k < j.size(); ++k) {
      out << pad;
      emit(j[k], out, depth + 1);
      out << (k + 1 < j.size() ? ",\n" : "\n");
    }
    out << close_pad << ']';
  } else {
    if (j.empty()) {
      out << "{}";
      return;
    }
    out << "{\n";
    std::size_t k = 0;
    for (auto it = j.begin(); it != j.end(); ++it, ++k) {
      out << pad << Json(it.key()).dump() << ": ";
      emit(it.value(), out, depth + 1);
      out << (k + 1 < j.size() ? ",\n" : "\n");
    }
    out << close_pad << '}';
  }
}

}  // namespace

std::string dump_json(const Json& j) {
  std::ostringstream out;
  emit(j, out, 0);
  out << '\n';
  return out.str();
}

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw StructuralError(std::string("malformed JSON: ") + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Json read_json_file(const std::string& path) { return parse_json(read_text_file(path)); }

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

Json vector_to_json(const VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v[k]);
  return out;
}

VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) throw StructuralError("expected a numeric array");
  VectorXd v(Eigen::Index(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw StructuralError("expected a numeric array");
    v[Eigen::Index(k)] = j[k].get<double>();
  }
  return v;
}

Json measure_to_json(const Measure& mu) {
  Json supports = Json::array();
  for (Eigen::Index m = 0; m < mu.size(); ++m) supports.push_back(vector_to_json(mu.atom(m)));
  return Json{{"weights", vector_to_json(mu.weights())}, {"supports", std::move(supports)}};
}

Measure measure_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("weights") || !j.contains("supports"))
    throw StructuralError("measure JSON needs \"weights\" and \"supports\"");
  const VectorXd a = vector_from_json(j.at("weights"));
  const Json& s = j.at("supports");
  if (!s.is_array() || s.empty()) throw StructuralError("\"supports\" must be a nonempty array");
  const Eigen::Index d = Eigen::Index(s[0].size());
  Points<double> x(d, Eigen::Index(s.size()));
  for (std::size_t m = 0; m < s.size(); ++m) {
    const VectorXd p = vector_from_json(s[m]);
    if (p.size() != d) throw StructuralError("support points differ in dimension");
    x.col(Eigen::Index(m)) = p;
  }
  return Measure(a, x);
}

Json domain_to_json(const DomainSpec<double>& dom) {
  if (dom.kind() == DomainKind::Box)
    return Json{{"kind", "box"}, {"lower", vector_to_json(dom.lower())},
                {"upper", vector_to_json(dom.upper())}};
  return Json{{"kind", "ball"}, {"center", vector_to_json(dom.center())},
              {"radius", dom.radius()}};
}

DomainSpec<double> domain_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "box")
    return DomainSpec<double>::box(vector_from_json(j.at("lower")), vector_from_json(j.at("upper")));
  if (kind == "ball")
    return DomainSpec<double>::ball(vector_from_json(j.at("center")), j.at("radius").get<double>());
  throw StructuralError("unknown domain kind '" + kind + "'");
}

Json theory_to_json(const TheoryConstants& c) {
  return Json{{"N_capacity", c.capacity.n},
              {"capacity_saturated", c.capacity.saturated},
              {"capacity_empty", c.capacity.empty},
              {"R0", c.R0},
              {"d_min", c.d_min},
              {"r", c.r},
              {"delta", c.delta}};
}

Json bank_to_json(const PatternBank<double>& bank, const std::optional<TheoryConstants>& theory) {
  Json patterns = Json::array();
  for (const auto& x : bank.patterns) patterns.push_back(measure_to_json(x));
  Json out{{"params",
            {{"M", bank.params.atoms},
             {"a_min", bank.params.a_min},
             {"delta_min", bank.params.delta_min},
             {"beta", bank.beta},
             {"epsilon", bank.epsilon},
             {"lambda", bank.lambda}}},
           {"domain", domain_to_json(bank.domain)},
           {"patterns", std::move(patterns)}};
  if (theory) out["theory"] = theory_to_json(*theory);
  return out;
}

PatternBank<double> bank_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("params") || !j.contains("domain") || !j.contains("patterns"))
    throw StructuralError("bank JSON needs \"params\", \"domain\" and \"patterns\"");
  const Json& p = j.at("params");
  PatternBank<double> bank;
  bank.params.atoms = p.at("M").get<Eigen::Index>();
  bank.params.a_min = p.at("a_min").get<double>();
  bank.params.delta_min = p.at("delta_min").get<double>();
  bank.beta = p.value("beta", 50.0);
  bank.epsilon = p.value("epsilon", 0.05);
  bank.lambda = p.value("lambda", 1.0);
  bank.domain = domain_from_json(j.at("domain"));
  for (const auto& x : j.at("patterns")) bank.patterns.push_back(measure_from_json(x));
  return bank;
}

std::optional<TheoryConstants> theory_from_json(const Json& j) {
  if (!j.contains("theory")) return std::nullopt;
  const Json& t = j.at("theory");
  TheoryConstants c;
  c.capacity.n = t.value("N_capacity", std::uint64_t(0));
  c.capacity.saturated = t.value("capacity_saturated", false);
  c.capacity.empty = t.value("capacity_empty", false);
  c.R0 = t.at("R0").get<double>();
  c.d_min = t.at("d_min").get<double>();
  c.r = t.at("r").get<double>();
  c.delta = t.at("delta").get<double>();
  return c;
}

Json separation_to_json(const SeparationStats& s) {
  Json out{{"pair_count", s.pair_count},
           {"min_mean_distance", s.pair_count ? Json(s.min_mean_distance) : Json(nullptr)},
           {"closest_pair", Json::array({s.closest_i, s.closest_j})},
           {"pairs_below_d_min", s.pairs_below_d_min},
           {"event_a", s.event_a}};
  out["min_pattern_divergence"] =
      s.divergence_computed ? Json(s.min_pattern_divergence) : Json(nullptr);
  return out;
}

Json audit_to_json(const AuditReport& rep) {
  return Json{{"name", rep.name},
              {"digest", rep.digest},
              {"status", to_string(rep.status)},
              {"bound", rep.bound},
              {"measured", rep.measured},
              {"slack", rep.slack},
              {"lower_bound", rep.lower_bound},
              {"tolerance", rep.tolerance},
              {"pass", rep.pass},
              {"note", rep.note}};
}

namespace {

std::string header(const char* energy_name, std::size_t n) {
  std::ostringstream out;
  out << "iter," << energy_name;
  for (std::size_t i = 0; i < n; ++i) out << ",S_eps_" << i;
  for (std::size_t i = 0; i < n; ++i) out << ",w_" << i;
  out << ",grad_norm,max_disp,clipped\n";
  return out.str();
}

}  // namespace

std::string trace_csv(const RetrievalTrace<double>& trace) {
  const std::size_t n =
      trace.records.empty() ? 0 : std::size_t(trace.records.front().state.divergences.size());
  std::ostringstream out;
  out << header("energy", n);
  for (const auto& rec : trace.records) {
    out << rec.iteration << ',' << format_number(rec.state.energy);
    for (std::size_t i = 0; i < n; ++i) out << ',' << format_number(rec.state.divergences[Eigen::Index(i)]);
    for (std::size_t i = 0; i < n; ++i) out << ',' << format_number(rec.state.weights[Eigen::Index(i)]);
    out << ',' << format_number(rec.shk_grad_norm) << ',' << format_number(rec.max_displacement)
        << ',' << rec.clipped << '\n';
  }
  return out.str();
}

std::string euclidean_trace_csv(const EuclideanTrace<double>& trace, const PatternBank<double>& bank,
                                double beta, Eigen::Index dim, Eigen::Index atoms,
                                const SinkhornConfig<double>& ot) {
  const Matrix<double> stored = stack_vectors(bank.patterns);
  const std::size_t n = bank.size();
  std::ostringstream out;
  out << header("lse_objective", n);
  for (std::size_t k = 0; k < trace.states.size(); ++k) {
    const VectorXd& xi = trace.states[k];
    const Measure mu = devectorize(xi, dim, atoms);
    const VectorXd w = softmax<double>(beta * (stored.transpose() * xi));
    out << k << ',' << format_number(trace.objective[k]);
    for (std::size_t i = 0; i < n; ++i)
      out << ',' << format_number(sinkhorn_divergence(mu, bank.patterns[i], ot).value);
    for (std::size_t i = 0; i < n; ++i) out << ',' << format_number(w[Eigen::Index(i)]);
    double step = 0, disp = 0;
    if (k + 1 < trace.states.size()) {
      const VectorXd diff = trace.states[k + 1] - xi;
      step = diff.norm();
      const Matrix<double> dx = Eigen::Map<const Matrix<double>>(diff.data(), dim, atoms);
      disp = dx.colwise().norm().maxCoeff();
    }
    out << ',' << format_number(step) << ',' << format_number(disp) << ",0\n";
  }
  return out.str();
}

}  // namespace otdam
