#include "medsync/relational.hpp"

#include "medsync/error.hpp"

#include <algorithm>

namespace medsync {

namespace {

Row row_from_assignment(const Schema& schema, const Assignment& cells) {
  Row row(schema.attrs().size());
  for (const auto& [attr, value] : cells) {
    const auto idx = schema.index_of(attr);
    if (!idx) throw Error(Errc::SchemaMismatch, "attribute '" + attr + "' not in schema");
    row[*idx] = value;
  }
  return row;
}

KeyTuple key_from_assignment(const Schema& schema, const Assignment& key) {
  if (key.size() != schema.key().size()) {
    throw Error(Errc::SchemaMismatch, "key binding must cover exactly the primary-key attributes");
  }
  KeyTuple out;
  out.reserve(schema.key().size());
  for (const auto& attr : schema.key()) {
    const auto it = key.find(attr);
    if (it == key.end()) throw Error(Errc::SchemaMismatch, "key binding lacks '" + attr + "'");
    out.push_back(it->second);
  }
  return out;
}

std::string describe(const KeyTuple& key) {
  std::string out = "(";
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (i) out += ",";
    out += key[i].is_null() ? "null" : key[i].text();
  }
  return out + ")";
}

nlohmann::json value_to_json(const Value& v) {
  return v.is_null() ? nlohmann::json(nullptr) : nlohmann::json(v.text());
}

Value value_from_json(const nlohmann::json& j) {
  if (j.is_null()) return Value::null();
  if (!j.is_string()) throw Error(Errc::ParseError, "cell must be a string or null");
  return Value(j.get<std::string>());
}

}  // namespace

Schema::Schema(std::vector<AttributeName> attrs, std::vector<AttributeName> key)
    : attrs_(std::move(attrs)), key_(std::move(key)) {
  AttrSet seen;
  for (const auto& a : attrs_) {
    if (a.empty()) throw Error(Errc::InvalidSchema, "empty attribute name");
    if (!seen.insert(a).second) throw Error(Errc::InvalidSchema, "duplicate attribute '" + a + "'");
  }
  if (key_.empty()) throw Error(Errc::InvalidSchema, "primary key must be non-empty");
  AttrSet key_seen;
  for (const auto& k : key_) {
    if (!key_seen.insert(k).second) throw Error(Errc::InvalidSchema, "duplicate key attribute '" + k + "'");
    const auto idx = index_of(k);
    if (!idx) throw Error(Errc::InvalidSchema, "key attribute '" + k + "' not in attrs");
    key_index_.push_back(*idx);
  }
}

std::optional<std::size_t> Schema::index_of(const AttributeName& a) const {
  const auto it = std::find(attrs_.begin(), attrs_.end(), a);
  if (it == attrs_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - attrs_.begin());
}

std::size_t Schema::require(const AttributeName& a) const {
  const auto idx = index_of(a);
  if (!idx) throw Error(Errc::UnknownAttribute, "'" + a + "'");
  return *idx;
}

bool Schema::is_key(const AttributeName& a) const {
  return std::find(key_.begin(), key_.end(), a) != key_.end();
}

KeyTuple Table::key_of(const Row& row) const {
  KeyTuple key;
  key.reserve(schema_.key().size());
  for (std::size_t i : schema_.key_indices()) key.push_back(row[i]);
  return key;
}

const Row* Table::find(const KeyTuple& key) const {
  const auto it = rows_.find(key);
  return it == rows_.end() ? nullptr : &it->second;
}

Table Table::with_id(std::string id) const {
  Table copy = *this;
  copy.id_ = std::move(id);
  return copy;
}

void Table::add_row(Row row) {
  const Schema& schema = schema_;
  if (row.size() != schema.attrs().size()) {
    throw Error(Errc::SchemaMismatch, "row has " + std::to_string(row.size()) + " cells, schema has " +
                                          std::to_string(schema.attrs().size()));
  }
  KeyTuple key = key_of(row);
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (key[i].is_null()) throw Error(Errc::SchemaMismatch, "Null in key attribute '" + schema.key()[i] + "'");
  }
  if (rows_.contains(key)) {
    throw Error(Errc::KeyConflict, "table '" + id_ + "' already has key " + describe(key));
  }
  rows_.emplace(std::move(key), std::move(row));
}

TableBuilder& TableBuilder::add(Row row) {
  table_.add_row(std::move(row));
  return *this;
}

Table insert_row(const Table& table, Row row) {
  Table out = table;
  out.add_row(std::move(row));
  return out;
}

Table insert_row(const Table& table, const Assignment& cells) {
  return insert_row(table, row_from_assignment(table.schema(), cells));
}

Table update_row(const Table& table, const Assignment& key, const Assignment& changes) {
  const Schema& schema = table.schema();
  const KeyTuple k = key_from_assignment(schema, key);
  for (const auto& [attr, value] : changes) {
    if (!schema.has(attr)) throw Error(Errc::SchemaMismatch, "attribute '" + attr + "' not in schema");
    if (schema.is_key(attr)) throw Error(Errc::KeyImmutable, "cannot change key attribute '" + attr + "'");
  }
  const auto it = table.rows_.find(k);
  if (it == table.rows_.end()) throw Error(Errc::NotFound, "no row with key " + describe(k));
  Table out = table;
  Row& row = out.rows_.at(k);
  for (const auto& [attr, value] : changes) row[*schema.index_of(attr)] = value;
  return out;
}

Table delete_row(const Table& table, const Assignment& key) {
  const KeyTuple k = key_from_assignment(table.schema(), key);
  if (!table.rows_.contains(k)) throw Error(Errc::NotFound, "no row with key " + describe(k));
  Table out = table;
  out.rows_.erase(k);
  return out;
}

std::set<std::vector<Value>> project(const Table& table, const std::vector<AttributeName>& attrs) {
  std::vector<std::size_t> idx;
  idx.reserve(attrs.size());
  for (const auto& a : attrs) idx.push_back(table.schema().require(a));
  std::set<std::vector<Value>> out;
  for (const auto& [key, row] : table.rows()) {
    std::vector<Value> partial;
    partial.reserve(idx.size());
    for (std::size_t i : idx) partial.push_back(row[i]);
    out.insert(std::move(partial));
  }
  return out;
}

bool check_fd(const Table& table, const AttrSet& determinant, const AttrSet& dependent) {
  std::vector<std::size_t> det, dep;
  for (const auto& a : determinant) det.push_back(table.schema().require(a));
  for (const auto& a : dependent) dep.push_back(table.schema().require(a));
  std::map<std::vector<Value>, std::vector<Value>> seen;
  for (const auto& [key, row] : table.rows()) {
    std::vector<Value> lhs, rhs;
    for (std::size_t i : det) lhs.push_back(row[i]);
    for (std::size_t i : dep) rhs.push_back(row[i]);
    const auto [it, inserted] = seen.emplace(std::move(lhs), rhs);
    if (!inserted && it->second != rhs) return false;
  }
  return true;
}

nlohmann::json schema_to_json(const Schema& schema) {
  return {{"attrs", schema.attrs()}, {"key", schema.key()}};
}

Schema schema_from_json(const nlohmann::json& doc) {
  try {
    return Schema(doc.at("attrs").get<std::vector<AttributeName>>(),
                  doc.at("key").get<std::vector<AttributeName>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("schema: ") + e.what());
  }
}

nlohmann::json table_to_json(const Table& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [key, row] : table.rows()) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& v : row) cells.push_back(value_to_json(v));
    rows.push_back(std::move(cells));
  }
  return {{"id", table.id()}, {"schema", schema_to_json(table.schema())}, {"rows", std::move(rows)}};
}

Table table_from_json(const nlohmann::json& doc) {
  try {
    TableBuilder builder(doc.at("id").get<std::string>(), schema_from_json(doc.at("schema")));
    for (const auto& cells : doc.at("rows")) {
      if (!cells.is_array()) throw Error(Errc::ParseError, "row must be an array");
      Row row;
      for (const auto& c : cells) row.push_back(value_from_json(c));
      builder.add(std::move(row));
    }
    return std::move(builder).build();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("table: ") + e.what());
  }
}

std::string canonicalize(const Table& table) { return table_to_json(table).dump(); }

Digest digest(const Table& table) { return sha256(canonicalize(table)); }

}  // namespace medsync
