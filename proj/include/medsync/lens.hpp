#pragma once

// Asymmetric projection lenses between a source table and a keyed view.
//
// get projects the source onto the view attributes (set semantics). put aligns
// view rows with source rows by the view key:
//   * every source row whose view-key cells match a view row has its view
//     attributes overwritten by that row (fan-out across all matches);
//   * source rows whose view key is absent from the view are deleted, which can
//     remove several source rows for one deleted view row;
//   * view rows matching no source row are inserted with every non-view
//     attribute Null, allowed only when the source key lies inside the view.
// Both directions require the functional dependency view_key -> view_attrs on
// the source; under it get(put(s, v)) == v and put(s, get(s)) == s.

#include "medsync/relational.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace medsync {

struct LensSpec {
  std::string lens_id;
  std::string source_table_id;
  std::vector<AttributeName> view_attrs;
  std::vector<AttributeName> view_key;

  friend bool operator==(const LensSpec&, const LensSpec&) = default;
};

class Lens {
 public:
  const LensSpec& spec() const noexcept { return spec_; }
  const Schema& source_schema() const noexcept { return source_schema_; }
  const Schema& view_schema() const noexcept { return view_schema_; }
  bool inserts_allowed() const noexcept { return inserts_allowed_; }

 private:
  friend Lens compile_lens(const LensSpec&, const Schema&);

  LensSpec spec_;
  Schema source_schema_;
  Schema view_schema_;
  bool inserts_allowed_ = false;
  std::vector<std::size_t> view_index_;  // source positions of view_attrs
  std::vector<std::size_t> key_index_;   // source positions of view_key
  friend Table get(const Lens&, const Table&);
  friend Table put(const Lens&, const Table&, const Table&);
};

// Errors: UnknownAttribute, EmptyViewKey, InvalidSchema (duplicates, key outside view).
Lens compile_lens(const LensSpec& spec, const Schema& source_schema);

// The view carries the lens id as its table id. Errors: SchemaMismatch, FdViolation.
Table get(const Lens& lens, const Table& source);

// The view's id is ignored. Errors: SchemaMismatch, FdViolation, InsertNotSupported,
// KeyConflict.
Table put(const Lens& lens, const Table& source, const Table& view);

// Shared view attributes of two lenses over one source. Errors: DifferentSource.
AttrSet overlap(const LensSpec& a, const LensSpec& b);

nlohmann::json lens_spec_to_json(const LensSpec& spec);
LensSpec lens_spec_from_json(const nlohmann::json& doc);

}  // namespace medsync
