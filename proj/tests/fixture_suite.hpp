// Runs the .ts fixture directory against expected.json.
#ifndef TIMECSL_TESTS_FIXTURE_SUITE_HPP
#define TIMECSL_TESTS_FIXTURE_SUITE_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "timecsl/dataio.hpp"

namespace timecsl::testing {

struct FixtureOutcome {
  std::string file;
  bool valid = false;  // which directory it came from
  bool ok = false;
  std::string detail;
};

inline std::string check_valid_fixture(const Dataset& ds, const nlohmann::json& want) {
  if (ds.name() != want.at("name").get<std::string>()) return "name " + ds.name();
  if (static_cast<long>(ds.size()) != want.at("n").get<long>()) return "N=" + std::to_string(ds.size());
  if (ds.channel_count() != want.at("d").get<Index>()) return "D=" + std::to_string(ds.channel_count());
  const auto& t = want.at("t");
  const auto& labels = want.at("labels");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds[i].length() != t.at(i).get<Index>()) return "T of series " + std::to_string(i);
    const bool has = ds[i].label().has_value();
    if (labels.at(i).is_null() ? has : (!has || *ds[i].label() != labels.at(i).get<std::string>()))
      return "label of series " + std::to_string(i);
  }
  return {};
}

inline std::vector<FixtureOutcome> run_ts_fixture_suite(const std::filesystem::path& root) {
  const auto expected = nlohmann::json::parse(read_text_file(root / "expected.json"));
  std::vector<FixtureOutcome> out;
  for (const auto& [name, want] : expected.at("valid").items()) {
    FixtureOutcome o{name, true, false, {}};
    try {
      o.detail = check_valid_fixture(read_dataset(root / "valid" / name), want);
      o.ok = o.detail.empty();
    } catch (const std::exception& e) {
      o.detail = e.what();
    }
    out.push_back(o);
  }
  for (const auto& [name, want] : expected.at("malformed").items()) {
    FixtureOutcome o{name, false, false, {}};
    try {
      read_dataset(root / "malformed" / name);
      o.detail = "parsed without error";
    } catch (const DataError& e) {
      o.detail = e.what();
      o.ok = e.line() == want.at("line").get<std::size_t>() && e.column() > 0 &&
             (!want.contains("column") || e.column() == want.at("column").get<std::size_t>()) &&
             o.detail.find(want.at("message").get<std::string>()) != std::string::npos;
    } catch (const std::exception& e) {
      o.detail = std::string("wrong error type: ") + e.what();
    }
    out.push_back(o);
  }
  return out;
}

}  // namespace timecsl::testing

#endif  // TIMECSL_TESTS_FIXTURE_SUITE_HPP
