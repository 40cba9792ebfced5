#pragma once

// Reference implementations over plain row lists. They share no code with the
// library beyond converting a Table into rows.

#include "medsync/relational.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace medsync::testing {

using Cell = std::optional<std::string>;
using PlainRow = std::map<std::string, Cell>;
using PlainTable = std::vector<PlainRow>;

PlainTable to_plain(const Table& table);
// Multiset equality, ignoring order.
bool same_rows(PlainTable a, PlainTable b);

// Projection with duplicates removed by linear search.
std::vector<std::vector<Cell>> oracle_project(const PlainTable& rows, const std::vector<std::string>& attrs);

// Compares every pair of rows.
bool oracle_fd(const PlainTable& rows, const std::vector<std::string>& determinant,
               const std::vector<std::string>& dependent);

bool oracle_key_unique(const PlainTable& rows, const std::vector<std::string>& key);

enum class PutOutcome { Ok, KeyConflict, InsertNotSupported };

struct PutResult {
  PutOutcome outcome = PutOutcome::Ok;
  PlainTable rows;
};

// Applies the put rules one at a time: overwrite every matching source row,
// drop source rows with no matching view row, then append unmatched view rows
// padded with Null.
PutResult oracle_put(const PlainTable& source, const std::vector<std::string>& source_attrs,
                     const std::vector<std::string>& source_key, const std::vector<std::string>& view_attrs,
                     const std::vector<std::string>& view_key, const PlainTable& view);

}  // namespace medsync::testing
