#include "medsync/lens.hpp"

#include "medsync/error.hpp"

#include <algorithm>
#include <set>

namespace medsync {

namespace {

void require_fd(const Lens& lens, const Table& source) {
  const AttrSet key(lens.spec().view_key.begin(), lens.spec().view_key.end());
  const AttrSet attrs(lens.spec().view_attrs.begin(), lens.spec().view_attrs.end());
  if (!check_fd(source, key, attrs)) {
    throw Error(Errc::FdViolation, "lens '" + lens.spec().lens_id + "': view key does not determine the view on '" +
                                       source.id() + "'");
  }
}

void require_source(const Lens& lens, const Table& source) {
  if (source.schema() != lens.source_schema()) {
    throw Error(Errc::SchemaMismatch, "lens '" + lens.spec().lens_id + "' does not match the schema of '" +
                                          source.id() + "'");
  }
}

}  // namespace

Lens compile_lens(const LensSpec& spec, const Schema& source_schema) {
  if (spec.view_key.empty()) throw Error(Errc::EmptyViewKey, "lens '" + spec.lens_id + "'");
  Lens lens;
  lens.spec_ = spec;
  lens.source_schema_ = source_schema;
  for (const auto& a : spec.view_attrs) lens.view_index_.push_back(source_schema.require(a));
  for (const auto& k : spec.view_key) {
    source_schema.require(k);
    if (std::find(spec.view_attrs.begin(), spec.view_attrs.end(), k) == spec.view_attrs.end()) {
      throw Error(Errc::InvalidSchema, "view key '" + k + "' is not a view attribute");
    }
    lens.key_index_.push_back(*source_schema.index_of(k));
  }
  lens.view_schema_ = Schema(spec.view_attrs, spec.view_key);
  lens.inserts_allowed_ = std::all_of(source_schema.key().begin(), source_schema.key().end(), [&](const auto& k) {
    return std::find(spec.view_attrs.begin(), spec.view_attrs.end(), k) != spec.view_attrs.end();
  });
  return lens;
}

Table get(const Lens& lens, const Table& source) {
  require_source(lens, source);
  require_fd(lens, source);
  Table view(lens.spec().lens_id, lens.view_schema());
  std::map<KeyTuple, Row> rows;
  for (const auto& [key, row] : source.rows()) {
    KeyTuple vkey;
    for (std::size_t i : lens.key_index_) vkey.push_back(row[i]);
    if (rows.contains(vkey)) continue;  // identical by the FD
    Row vrow;
    for (std::size_t i : lens.view_index_) vrow.push_back(row[i]);
    rows.emplace(std::move(vkey), std::move(vrow));
  }
  TableBuilder builder(lens.spec().lens_id, lens.view_schema());
  for (auto& [k, r] : rows) builder.add(std::move(r));
  return std::move(builder).build();
}

Table put(const Lens& lens, const Table& source, const Table& view) {
  require_source(lens, source);
  if (view.schema() != lens.view_schema()) {
    throw Error(Errc::SchemaMismatch, "view does not match lens '" + lens.spec().lens_id + "'");
  }
  require_fd(lens, source);

  TableBuilder out(source.id(), source.schema());
  std::set<KeyTuple> matched;
  for (const auto& [key, row] : source.rows()) {
    KeyTuple vkey;
    for (std::size_t i : lens.key_index_) vkey.push_back(row[i]);
    const Row* vrow = view.find(vkey);
    if (vrow == nullptr) continue;  // deleted from the view
    Row updated = row;
    for (std::size_t j = 0; j < lens.view_index_.size(); ++j) updated[lens.view_index_[j]] = (*vrow)[j];
    out.add(std::move(updated));
    matched.insert(std::move(vkey));
  }
  for (const auto& [vkey, vrow] : view.rows()) {
    if (matched.contains(vkey)) continue;
    if (!lens.inserts_allowed()) {
      throw Error(Errc::InsertNotSupported, "lens '" + lens.spec().lens_id +
                                                "' cannot insert: the source key is not inside the view");
    }
    Row fresh(source.schema().attrs().size());
    for (std::size_t j = 0; j < lens.view_index_.size(); ++j) fresh[lens.view_index_[j]] = vrow[j];
    out.add(std::move(fresh));
  }
  return std::move(out).build();
}

AttrSet overlap(const LensSpec& a, const LensSpec& b) {
  if (a.source_table_id != b.source_table_id) {
    throw Error(Errc::DifferentSource, "'" + a.lens_id + "' reads '" + a.source_table_id + "', '" + b.lens_id +
                                           "' reads '" + b.source_table_id + "'");
  }
  const AttrSet lhs(a.view_attrs.begin(), a.view_attrs.end());
  AttrSet out;
  for (const auto& attr : b.view_attrs) {
    if (lhs.contains(attr)) out.insert(attr);
  }
  return out;
}

nlohmann::json lens_spec_to_json(const LensSpec& spec) {
  return {{"lens_id", spec.lens_id},
          {"source", spec.source_table_id},
          {"view_attrs", spec.view_attrs},
          {"view_key", spec.view_key}};
}

LensSpec lens_spec_from_json(const nlohmann::json& doc) {
  try {
    return LensSpec{doc.at("lens_id").get<std::string>(), doc.at("source").get<std::string>(),
                    doc.at("view_attrs").get<std::vector<AttributeName>>(),
                    doc.at("view_key").get<std::vector<AttributeName>>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("lens spec: ") + e.what());
  }
}

}  // namespace medsync
