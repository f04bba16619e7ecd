#ifndef TRIMKS_IO_HPP_
#define TRIMKS_IO_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "trimks/model_metrics.hpp"
#include "trimks/robust_test.hpp"

namespace trimks {

inline constexpr const char* kToolVersion = "0.1.0";

enum class GapFileFormat { Wide, Long };

GapFileFormat gap_format_from_name(const std::string& name);

/// Canonical wide table: header `point_id,label,<model_id>...`, one row per
/// test point, gaps as decimal text. Throws ValidationError on any parse or
/// consistency failure (missing cells, bad labels, non-finite values).
LogitGapMatrix load_gaps_wide(std::istream& in, const std::string& origin);

/// Long logit table: header `model_id,point_id,logit_pos,logit_neg,label`,
/// one row per (model, point); the full M x N' grid must be covered exactly
/// once. Gaps are formed as logit_pos - logit_neg on load. Row order fixes
/// the model order (first appearance) and point order likewise.
LogitGapMatrix load_gaps_long(std::istream& in, const std::string& origin);

LogitGapMatrix load_gaps(const std::string& path, GapFileFormat format);

/// Writes the canonical wide format with 17 significant digits, enough for
/// doubles to round-trip exactly.
void save_gaps_wide(const LogitGapMatrix& matrix, std::ostream& out);
void save_gaps_wide(const LogitGapMatrix& matrix, const std::string& path);

/// Shortest decimal text that parses back to exactly this double.
std::string format_double(double value);

/// Parses "START:STOP:STEP" into an ascending grid including STOP (within
/// half a step). Throws ValidationError on malformed input.
std::vector<double> parse_alpha_grid(const std::string& text);

/// Everything needed to reproduce one alpha run plus its results.
struct AlphaReport {
  std::string version = kToolVersion;
  std::string gaps_file;
  std::string format;  // "wide" | "long"
  std::size_t model_index = 0;
  std::size_t n_models = 0;
  std::size_t n_points = 0;
  AlphaEstimate estimate;

  std::string to_json() const;
  static AlphaReport from_json(const std::string& text);
};

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace trimks

#endif  // TRIMKS_IO_HPP_
