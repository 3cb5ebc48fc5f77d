#pragma once

#include "tvx/exchange.hpp"
#include "tvx/hybrid.hpp"
#include "tvx/problem.hpp"
#include "tvx/sliding.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace tvx {

using Json = nlohmann::ordered_json;

Json to_json(const DiscreteMeasure& mu);
DiscreteMeasure measure_from_json(const Json& j);

Json points_to_json(const PointSet& points);
PointSet points_from_json(const Json& j, int dim);

Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json operator_to_json(const MeasurementOperator& op);
MeasurementOperator operator_from_json(const Json& j);

Json to_json(const Problem& problem);
Problem problem_from_json(const Json& j);

Json to_json(const Reference& ref);
Reference reference_from_json(const Json& j);

/// Configs are read leniently: absent keys keep their defaults, unknown keys are rejected.
ExchangeConfig exchange_config_from_json(const Json& j);
SlideConfig slide_config_from_json(const Json& j);
HybridConfig hybrid_config_from_json(const Json& j);
Json to_json(const ExchangeConfig& cfg);
Json to_json(const SlideConfig& cfg);
Json to_json(const HybridConfig& cfg);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

/// JSON number, or the format_number string when v is not finite.
Json number_json(double v);

/// Shortest round-trip decimal representation ("nan" for NaN).
std::string format_number(double v);

extern const char* const kMetricsHeader;
extern const char* const kHybridExtraHeader;

/// metrics.csv with the fixed header, plus the hybrid columns when `hybrid` is set.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows, bool hybrid);

/// diagnostics.csv: the columns of MetricsRow outside the fixed schema.
void write_diagnostics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

/// g_history.csv: iteration, G, grad_norm, step.
void write_slide_history_csv(const std::filesystem::path& path, const SlideResult& res);

/// Simple numeric CSV: header line plus rows. Cells that do not parse become NaN.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace tvx
