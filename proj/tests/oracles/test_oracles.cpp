#include <doctest.h>

#include "oracle_checks.hpp"

using namespace bistab;

TEST_CASE("library agrees with the independent references") {
  const auto results = oracle::check_references(oracle::load_references(BISTAB_ORACLE_JSON));
  CHECK(results.size() == oracle::load_references(BISTAB_ORACLE_JSON).size());
  for (const auto& r : results) {
    INFO(r.name << ": library " << r.library << ", reference " << r.reference);
    CHECK(r.ok);
  }
}
