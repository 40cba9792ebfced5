#include "support/generators.hpp"

#include "medsync/error.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace medsync::testing {

std::vector<std::string> Gen::subset(const std::vector<std::string>& xs, std::size_t min_size) {
  std::vector<std::string> out;
  do {
    out.clear();
    for (const auto& x : xs) {
      if (chance(0.5)) out.push_back(x);
    }
  } while (out.size() < min_size);
  std::shuffle(out.begin(), out.end(), rng_);
  return out;
}

LensCase random_lens_case(Gen& g) {
  std::vector<std::string> attrs;
  const std::size_t n = g.between(2, 5);
  for (std::size_t i = 0; i < n; ++i) attrs.push_back("a" + std::to_string(i));
  std::vector<std::string> key = g.subset(attrs, 1);
  if (key.size() > 2) key.resize(2);
  const Schema schema(attrs, key);

  const std::vector<std::string> view_attrs = g.subset(attrs, 1);
  std::vector<std::string> view_key = g.subset(view_attrs, 1);
  if (view_key.size() > 2) view_key.resize(2);
  const Lens lens = compile_lens({"L", "S", view_attrs, view_key}, schema);

  // Raw rows, then force view_key -> view_attrs by copying each group's first row.
  std::vector<Row> raw;
  const std::size_t rows = g.between(0, 8);
  for (std::size_t r = 0; r < rows; ++r) {
    Row row;
    for (const auto& a : attrs) {
      const bool nullable = !schema.is_key(a) &&
                            std::find(view_key.begin(), view_key.end(), a) == view_key.end();
      row.push_back(nullable && g.chance(0.15) ? Value::null() : Value(g.value()));
    }
    raw.push_back(std::move(row));
  }
  std::map<std::vector<Value>, Row> first;
  TableBuilder out("S", schema);
  for (auto& row : raw) {
    std::vector<Value> vk;
    for (const auto& a : view_key) vk.push_back(row[schema.require(a)]);
    const auto [it, fresh] = first.emplace(vk, row);
    if (!fresh) {
      for (const auto& a : view_attrs) row[schema.require(a)] = it->second[schema.require(a)];
    }
    try {
      out.add(row);
    } catch (const Error&) {
      // duplicate source key: drop the row
    }
  }
  return LensCase{lens, std::move(out).build()};
}

Table random_view_edit(Gen& g, const Lens& lens, const Table& view) {
  const Schema& vs = lens.view_schema();
  const Schema& ss = lens.source_schema();
  std::vector<std::string> non_key;
  for (const auto& a : vs.attrs()) {
    if (!vs.is_key(a)) non_key.push_back(a);
  }
  auto cell = [&](const std::string& a) {
    return !ss.is_key(a) && g.chance(0.1) ? Value::null() : Value(g.value());
  };

  Table out = view;
  const std::size_t edits = g.between(1, 4);
  for (std::size_t e = 0; e < edits; ++e) {
    const std::size_t op = g.below(3);
    std::vector<const Row*> rows;
    for (const auto& [k, r] : out.rows()) rows.push_back(&r);
    if (op == 0 && !rows.empty() && !non_key.empty()) {
      const Row& row = *g.pick(rows);
      Assignment key;
      for (const auto& a : vs.key()) key[a] = row[vs.require(a)];
      const std::string& attr = g.pick(non_key);
      out = update_row(out, key, {{attr, cell(attr)}});
    } else if (op == 1 && !rows.empty()) {
      const Row& row = *g.pick(rows);
      Assignment key;
      for (const auto& a : vs.key()) key[a] = row[vs.require(a)];
      out = delete_row(out, key);
    } else if (op == 2 && lens.inserts_allowed()) {
      Assignment cells;
      for (const auto& a : vs.attrs()) {
        cells[a] = vs.is_key(a) ? Value("n" + std::to_string(g.below(3))) : cell(a);
      }
      try {
        out = insert_row(out, cells);
      } catch (const Error&) {
        // view key already present
      }
    }
  }
  return out;
}

}  // namespace medsync::testing
