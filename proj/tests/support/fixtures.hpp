#pragma once

#include "medsync/lens.hpp"
#include "medsync/relational.hpp"

#include <filesystem>
#include <string>

namespace medsync::testing {

// Doctor's full table.
inline Table fixture_d3() {
  return std::move(TableBuilder("D3", Schema({"a0", "a1", "a2", "a4", "a5"}, {"a0", "a1"}))
                       .add({"P1", "MedX", "clinNote1", "5mg", "MeA1"})
                       .add({"P2", "MedX", "clinNote2", "10mg", "MeA1"})
                       .add({"P1", "MedY", "clinNote3", "2mg", "MeA9"}))
      .build();
}

// Patient's full table.
inline Table fixture_d1() {
  return std::move(TableBuilder("D1", Schema({"a0", "a1", "a2", "a3", "a4"}, {"a0", "a1"}))
                       .add({"P1", "MedX", "clinNote1", "addr1", "5mg"})
                       .add({"P2", "MedX", "clinNote2", "addr2", "10mg"})
                       .add({"P1", "MedY", "clinNote3", "addr1", "2mg"}))
      .build();
}

// Researcher's full table.
inline Table fixture_d2() {
  return std::move(TableBuilder("D2", Schema({"a1", "a5", "a6"}, {"a1"}))
                       .add({"MedX", "MeA1", "MoA1"})
                       .add({"MedY", "MeA9", "MoA9"}))
      .build();
}

inline LensSpec spec_l31() { return {"L31", "D3", {"a0", "a1", "a2", "a4"}, {"a0", "a1"}}; }
inline LensSpec spec_l32() { return {"L32", "D3", {"a1", "a5"}, {"a1"}}; }
inline LensSpec spec_l13() { return {"L13", "D1", {"a0", "a1", "a2", "a4"}, {"a0", "a1"}}; }
inline LensSpec spec_l23() { return {"L23", "D2", {"a1", "a5"}, {"a1"}}; }

inline std::filesystem::path scenario_path(const std::string& name) {
  return std::filesystem::path(MEDSYNC_SCENARIO_DIR) / (name + ".scenario.json");
}

inline const char* const kBundledScenarios[] = {"empty",         "clinic",          "clinic_cascade", "permission_grant",
                                                "serialization", "stale_version", "unauthorized"};

}  // namespace medsync::testing
