#pragma once

#include "otdam/audit.hpp"
#include "otdam/baseline.hpp"
#include "otdam/retrieval.hpp"
#include "otdam/sampling.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace otdam {

using Json = nlohmann::ordered_json;

/// %.17g; non-finite values become "nan", "inf" or "-inf" (CSV) and null (JSON).
std::string format_number(double v);

/// Pretty JSON with every floating-point number written at 17 significant digits.
std::string dump_json(const Json& j);

Json parse_json(const std::string& text);
Json read_json_file(const std::string& path);
std::string read_text_file(const std::string& path);
/// Writes through a temporary sibling and renames it into place.
void write_text_atomic(const std::string& path, const std::string& content);

Json vector_to_json(const VectorXd& v);
VectorXd vector_from_json(const Json& j);

Json measure_to_json(const Measure& mu);
Measure measure_from_json(const Json& j);

Json domain_to_json(const DomainSpec<double>& dom);
DomainSpec<double> domain_from_json(const Json& j);

Json bank_to_json(const PatternBank<double>& bank,
                  const std::optional<TheoryConstants>& theory = std::nullopt);
PatternBank<double> bank_from_json(const Json& j);
/// The optional "theory" block written by the sampler.
std::optional<TheoryConstants> theory_from_json(const Json& j);

Json theory_to_json(const TheoryConstants& c);
Json separation_to_json(const SeparationStats& s);
Json audit_to_json(const AuditReport& rep);

/// Columns: iter, energy, S_eps_0.., w_0.., grad_norm, max_disp, clipped.
std::string trace_csv(const RetrievalTrace<double>& trace);

/// Same schema with energy replaced by lse_objective; divergences and weights are those of
/// the devectorized state, grad_norm is |xi_{k+1} - xi_k|_2.
std::string euclidean_trace_csv(const EuclideanTrace<double>& trace, const PatternBank<double>& bank,
                                double beta, Eigen::Index dim, Eigen::Index atoms,
                                const SinkhornConfig<double>& ot);

}  // namespace otdam
