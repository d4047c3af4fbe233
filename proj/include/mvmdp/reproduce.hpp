#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvmdp/parallel.hpp"

namespace mvmdp {

struct CheckRow {
  std::string name;
  double expected = 0.0;
  double actual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool asserted = true;  // informational rows never fail the report
  std::string note;
};

struct ReproduceOptions {
  int threads = default_threads();
  std::uint64_t seed = 0;
  std::size_t mc_paths = 1'000'000;
};

struct ReproduceReport {
  std::string experiment;
  std::vector<CheckRow> rows;
  nlohmann::json artifacts = nlohmann::json::object();
  double seconds = 0.0;

  bool ok() const;
  std::size_t failures() const;
};

ReproduceReport reproduce_portfolio_ex1(const ReproduceOptions& opts = {});
ReproduceReport reproduce_queueing(const ReproduceOptions& opts = {});
ReproduceReport reproduce_inventory(const ReproduceOptions& opts = {});
// Dispatch by name: portfolio-ex1, queueing, inventory.
ReproduceReport reproduce(const std::string& experiment, const ReproduceOptions& opts = {});

nlohmann::json report_to_json(const ReproduceReport& r);
std::string report_table(const ReproduceReport& r);

}  // namespace mvmdp
