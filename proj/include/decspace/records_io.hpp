#ifndef DECSPACE_RECORDS_IO_HPP
#define DECSPACE_RECORDS_IO_HPP

// Text formats exchanged between pipeline stages. CSV files carry a header
// row and print reals with 9 significant digits.

#include "decspace/attacks.hpp"
#include "decspace/boundary.hpp"
#include "decspace/feedback.hpp"
#include "decspace/metrics.hpp"
#include "decspace/network.hpp"
#include "decspace/theory.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace decspace {

std::string format_real(double v, int digits = 9);
std::string format_fixed(double v, int decimals);

inline constexpr const char* kMarginsHeader = "sample_index,origin_class,direction_index,sign,margin,adjacent_class";

void write_margins_csv(std::ostream& out, std::span<const MarginRecord> records);
std::vector<MarginRecord> read_margins_csv(std::istream& in);

void write_matrix_csv(std::ostream& out, const MeanMarginMatrix& m);

nlohmann::json report_to_json(const RobustnessReport& r);
RobustnessReport report_from_json(const nlohmann::json& doc);

void write_examples_csv(std::ostream& out, std::span<const GeneratedExample> examples);
nlohmann::json plan_to_json(const GenerationPlan& plan, const GenerationResult* result = nullptr);

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve, std::string_view method,
                     std::string_view model_id, bool header = true);

void write_trace_csv(std::ostream& out, std::span<const EpochStats> trace);

nlohmann::json theory_to_json(const TheoryReport& r);

nlohmann::json cci_rows_to_json(std::span<const CciCrossRow> rows);

// File helpers; throw std::runtime_error naming the path on failure.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace decspace

#endif  // DECSPACE_RECORDS_IO_HPP
