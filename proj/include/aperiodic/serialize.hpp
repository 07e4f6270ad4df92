#pragma once

// JSON and CSV forms of the artifact's objects.  Field order is stable and
// doubles are written with enough digits to read back bit for bit; the
// non-finite values that a margin can take are written as strings.

#include "aperiodic/cocycle.hpp"
#include "aperiodic/model_maps.hpp"
#include "aperiodic/odometer.hpp"
#include "aperiodic/tower.hpp"
#include "aperiodic/verifier.hpp"

#include <json.hpp>

#include <string>

namespace aperiodic {

using Json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json to_json(const Cocycled& c);
Cocycled cocycle_from_json(const Json& j);

Json to_json(const TowerSchedule& s);
TowerSchedule schedule_from_json(const Json& j);

Json to_json(const SaddleModel& m);
SaddleModel model_from_json(const Json& j);

Json to_json(const BudgetReport& b);
Json to_json(const TangencyCertificate& c);
TangencyCertificate tangency_from_json(const Json& j);

Json to_json(const Tower& t);
Tower tower_from_json(const Json& j);

Json to_json(const VerdictReport& r);
VerdictReport report_from_json(const Json& j);

Json to_json(const Prop22Result& r);

// (stage, chi-, chi_c, chi+) rows; chi_c is empty in dimension 2
std::string spectra_csv(const Tower& t);
// deepest centres, one row per sample
std::string cantor_csv(const Tower& t);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);
// parse errors and schema errors both surface as FormatError
Json parse_json(const std::string& text);

}  // namespace aperiodic
