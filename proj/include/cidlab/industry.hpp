#pragma once

#include <string>
#include <vector>

#include "cidlab/panel.hpp"

namespace cidlab {

struct SicRange {
  int sic_low = 0;
  int sic_high = 0;
  int industry_code = 0;
  std::string industry_name;
};

// Maps 4-digit SIC codes to industry codes either through explicit ranges
// (Fama-French style scheme files) or by digit truncation (SIC2/SIC3/SIC4).
class IndustryScheme {
 public:
  // Range-based scheme; ranges must not overlap.
  IndustryScheme(std::string name, std::vector<SicRange> ranges);
  // Builtin truncation scheme, digits in 1..4.
  static IndustryScheme sic_digits(int digits);
  // Loads a scheme file (sic_low,sic_high,industry_code,industry_name) or
  // resolves a builtin name "SIC1".."SIC4".
  static IndustryScheme load(const std::string& path_or_name);

  const std::string& name() const { return name_; }
  int num_industries() const { return num_industries_; }

  // Industry code for a SIC, or kNoIndustry when unmapped / sic absent.
  int classify_sic(int sic) const;

 private:
  std::string name_;
  std::vector<SicRange> ranges_;  // sorted by sic_low
  int truncate_digits_ = 0;       // 0 = range-based
  int num_industries_ = 0;
};

// Annotates every observation with its industry code (kNoIndustry when the
// SIC is absent or unmapped). Total and idempotent; unmapped SICs are a
// data condition, not an error.
ReturnPanel classify(const ReturnPanel& panel, const IndustryScheme& scheme);

}  // namespace cidlab
