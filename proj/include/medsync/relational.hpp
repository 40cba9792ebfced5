#pragma once

// Relational substrate: tables with a declared primary key, entry-level CRUD,
// projection, functional-dependency checks and canonical serialization.
//
// Tables are values. Every operation returns a new table and leaves its input
// untouched, so a Table can be shared freely between threads.

#include "medsync/digest.hpp"

#include <nlohmann/json.hpp>

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace medsync {

using AttributeName = std::string;
using AttrSet = std::set<AttributeName>;

// A cell: Text or Null. Null orders before every Text value.
class Value {
 public:
  Value() = default;
  Value(std::string text) : text_(std::move(text)) {}  // NOLINT(google-explicit-constructor)
  Value(const char* text) : text_(text) {}              // NOLINT(google-explicit-constructor)

  static Value null() { return Value{}; }

  bool is_null() const noexcept { return !text_.has_value(); }
  // Precondition: !is_null().
  const std::string& text() const { return *text_; }

  auto operator<=>(const Value&) const = default;

 private:
  std::optional<std::string> text_;
};

using Row = std::vector<Value>;                    // aligned with Schema::attrs()
using KeyTuple = std::vector<Value>;               // aligned with Schema::key()
using Assignment = std::map<AttributeName, Value>; // attribute -> value bindings

class Schema {
 public:
  Schema() = default;
  // Throws Error(InvalidSchema) on duplicates, empty names, an empty key or a key
  // attribute that is not in `attrs`. Key order is the declared order.
  Schema(std::vector<AttributeName> attrs, std::vector<AttributeName> key);

  const std::vector<AttributeName>& attrs() const noexcept { return attrs_; }
  const std::vector<AttributeName>& key() const noexcept { return key_; }
  // Positions of the key attributes within attrs(), in key order.
  const std::vector<std::size_t>& key_indices() const noexcept { return key_index_; }

  bool has(const AttributeName& a) const { return index_of(a).has_value(); }
  std::optional<std::size_t> index_of(const AttributeName& a) const;
  // Throws Error(UnknownAttribute).
  std::size_t require(const AttributeName& a) const;
  bool is_key(const AttributeName& a) const;

  friend bool operator==(const Schema&, const Schema&) = default;

 private:
  std::vector<AttributeName> attrs_;
  std::vector<AttributeName> key_;
  std::vector<std::size_t> key_index_;
};

class Table {
 public:
  Table() = default;
  Table(std::string id, Schema schema) : id_(std::move(id)), schema_(std::move(schema)) {}

  const std::string& id() const noexcept { return id_; }
  const Schema& schema() const noexcept { return schema_; }
  // Rows in canonical order: ascending by primary-key cells.
  const std::map<KeyTuple, Row>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }

  KeyTuple key_of(const Row& row) const;
  const Row* find(const KeyTuple& key) const;

  Table with_id(std::string id) const;

  friend bool operator==(const Table&, const Table&) = default;

 private:
  friend Table insert_row(const Table&, Row);
  friend Table delete_row(const Table&, const Assignment&);
  friend Table update_row(const Table&, const Assignment&, const Assignment&);
  friend class TableBuilder;

  void add_row(Row row);

  std::string id_;
  Schema schema_;
  std::map<KeyTuple, Row> rows_;
};

// Accumulates rows in place; used where building row by row through
// insert_row would copy the table per row.
class TableBuilder {
 public:
  TableBuilder(std::string id, Schema schema) : table_(std::move(id), std::move(schema)) {}
  // Same checks and errors as insert_row.
  TableBuilder& add(Row row);
  Table build() && { return std::move(table_); }

 private:
  Table table_;
};

// Errors: SchemaMismatch (arity or Null key cell), KeyConflict.
Table insert_row(const Table& table, Row row);
// Convenience overload binding cells by name; missing attributes are Null.
Table insert_row(const Table& table, const Assignment& cells);
// Errors: SchemaMismatch (key does not bind exactly the key attributes, unknown
// changed attribute), KeyImmutable, NotFound.
Table update_row(const Table& table, const Assignment& key, const Assignment& changes);
// Errors: SchemaMismatch, NotFound.
Table delete_row(const Table& table, const Assignment& key);

// Set-semantics projection onto `attrs` (in the given order). Errors: UnknownAttribute.
std::set<std::vector<Value>> project(const Table& table, const std::vector<AttributeName>& attrs);

// True iff no two rows agree on every determinant cell yet differ on a dependent cell.
// Errors: UnknownAttribute.
bool check_fd(const Table& table, const AttrSet& determinant, const AttrSet& dependent);

// Canonical document {"id","schema":{"attrs","key"},"rows":[[...],...]}, rows in key order.
nlohmann::json table_to_json(const Table& table);
// Rows may appear in any order. Errors: ParseError, plus insert_row errors.
Table table_from_json(const nlohmann::json& doc);
nlohmann::json schema_to_json(const Schema& schema);
Schema schema_from_json(const nlohmann::json& doc);

std::string canonicalize(const Table& table);
Digest digest(const Table& table);

}  // namespace medsync
