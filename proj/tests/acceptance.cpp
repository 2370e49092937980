// Acceptance suite placeholder; criteria are filled in as the experiment
// configurations are pinned.
#include "doctest.h"

TEST_CASE("criterion_00_scaffold") { CHECK(true); }
