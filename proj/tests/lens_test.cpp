#include "medsync/error.hpp"
#include "medsync/lens.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

namespace medsync {
namespace {

using testing::fixture_d3;

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::IoError;
}

Lens l31() { return compile_lens(testing::spec_l31(), fixture_d3().schema()); }
Lens l32() { return compile_lens(testing::spec_l32(), fixture_d3().schema()); }

Table view_of(const Lens& lens, std::initializer_list<Row> rows) {
  TableBuilder b(lens.spec().lens_id, lens.view_schema());
  for (const auto& r : rows) b.add(r);
  return std::move(b).build();
}

TEST(CompileLens, InsertsAllowedIffSourceKeyInsideView) {
  EXPECT_FALSE(l32().inserts_allowed());
  EXPECT_TRUE(l31().inserts_allowed());
  EXPECT_EQ(l32().view_schema(), Schema({"a1", "a5"}, {"a1"}));
}

TEST(CompileLens, Errors) {
  const Schema s = fixture_d3().schema();
  EXPECT_EQ(code_of([&] { compile_lens({"L", "D3", {"a1", "a9"}, {"a1"}}, s); }), Errc::UnknownAttribute);
  EXPECT_EQ(code_of([&] { compile_lens({"L", "D3", {"a1", "a5"}, {}}, s); }), Errc::EmptyViewKey);
  EXPECT_EQ(code_of([&] { compile_lens({"L", "D3", {"a1"}, {"a5"}}, s); }), Errc::InvalidSchema);
  EXPECT_EQ(code_of([&] { compile_lens({"L", "D3", {"a1", "a1"}, {"a1"}}, s); }), Errc::InvalidSchema);
}

TEST(Get, L32OverFixture) {
  const Table v = get(l32(), fixture_d3());
  EXPECT_EQ(v, view_of(l32(), {{"MedX", "MeA1"}, {"MedY", "MeA9"}}));
  EXPECT_EQ(v.id(), "L32");
}

TEST(Get, AllAttributesIsIdentityOnRows) {
  const Table src = fixture_d3();
  const Lens all = compile_lens({"All", "D3", src.schema().attrs(), src.schema().key()}, src.schema());
  EXPECT_EQ(get(all, src).rows(), src.rows());
}

TEST(Get, FdViolation) {
  const Table broken = update_row(fixture_d3(), {{"a0", "P2"}, {"a1", "MedX"}}, {{"a5", "MeA7"}});
  EXPECT_EQ(code_of([&] { get(l32(), broken); }), Errc::FdViolation);
  EXPECT_EQ(code_of([&] { put(l32(), broken, get(l32(), fixture_d3())); }), Errc::FdViolation);
}

TEST(Get, WrongSourceSchema) {
  EXPECT_EQ(code_of([] { get(l32(), testing::fixture_d1()); }), Errc::SchemaMismatch);
}

TEST(Put, FanOutUpdateMatchesOracle) {
  const Table src = fixture_d3();
  const Table view = view_of(l32(), {{"MedX", "MeA2"}, {"MedY", "MeA9"}});
  const Table out = put(l32(), src, view);

  Table expected = update_row(src, {{"a0", "P1"}, {"a1", "MedX"}}, {{"a5", "MeA2"}});
  expected = update_row(expected, {{"a0", "P2"}, {"a1", "MedX"}}, {{"a5", "MeA2"}});
  EXPECT_EQ(out, expected);
  EXPECT_EQ(*out.find({"P1", "MedY"}), *src.find({"P1", "MedY"}));

  const auto oracle = testing::oracle_put(testing::to_plain(src), src.schema().attrs(), src.schema().key(),
                                          {"a1", "a5"}, {"a1"}, testing::to_plain(view));
  ASSERT_EQ(oracle.outcome, testing::PutOutcome::Ok);
  EXPECT_TRUE(testing::same_rows(testing::to_plain(out), oracle.rows));
}

TEST(Put, GetPutInstance) {
  EXPECT_EQ(put(l32(), fixture_d3(), get(l32(), fixture_d3())), fixture_d3());
  EXPECT_EQ(put(l31(), fixture_d3(), get(l31(), fixture_d3())), fixture_d3());
}

TEST(Put, InsertNotSupported) {
  const Table view = view_of(l32(), {{"MedX", "MeA1"}, {"MedY", "MeA9"}, {"MedZ", "MeA5"}});
  EXPECT_EQ(code_of([&] { put(l32(), fixture_d3(), view); }), Errc::InsertNotSupported);
}

TEST(Put, DeleteRemovesEveryMatchingSourceRow) {
  const Table out = put(l32(), fixture_d3(), view_of(l32(), {{"MedY", "MeA9"}}));
  EXPECT_EQ(out.size(), 1u);
  EXPECT_NE(out.find({"P1", "MedY"}), nullptr);
}

TEST(Put, InsertPadsWithNull) {
  const Table view = insert_row(get(l31(), fixture_d3()), Row{"P3", "MedZ", "note", "1mg"});
  const Table out = put(l31(), fixture_d3(), view);
  const Row* fresh = out.find({"P3", "MedZ"});
  ASSERT_NE(fresh, nullptr);
  EXPECT_TRUE((*fresh)[4].is_null());
  EXPECT_EQ(get(l31(), out), view);
}

TEST(Put, ViewIdIsIgnored) {
  EXPECT_EQ(put(l32(), fixture_d3(), get(l32(), fixture_d3()).with_id("D23")), fixture_d3());
}

TEST(Overlap, Examples) {
  EXPECT_EQ(overlap(testing::spec_l31(), testing::spec_l32()), AttrSet{"a1"});
  const LensSpec l = testing::spec_l31();
  EXPECT_EQ(overlap(l, l), AttrSet(l.view_attrs.begin(), l.view_attrs.end()));
  EXPECT_TRUE(overlap({"A", "D3", {"a0"}, {"a0"}}, {"B", "D3", {"a5"}, {"a5"}}).empty());
  EXPECT_EQ(code_of([] { overlap(testing::spec_l31(), testing::spec_l13()); }), Errc::DifferentSource);
}

TEST(LensSpecJson, RoundTrip) {
  const auto j = lens_spec_to_json(testing::spec_l32());
  EXPECT_EQ(j.dump(), R"({"lens_id":"L32","source":"D3","view_attrs":["a1","a5"],"view_key":["a1"]})");
  EXPECT_EQ(lens_spec_from_json(j), testing::spec_l32());
}

constexpr int kCases = 1500;

TEST(LensProperty, GetPut) {
  testing::Gen g(101);
  for (int i = 0; i < kCases; ++i) {
    const auto c = testing::random_lens_case(g);
    ASSERT_EQ(put(c.lens, c.source, get(c.lens, c.source)), c.source) << "case " << i;
  }
}

TEST(LensProperty, PutGetAgainstOracle) {
  testing::Gen g(202);
  int valid = 0;
  int inserts = 0;
  int deletes = 0;
  for (int i = 0; valid < kCases; ++i) {
    ASSERT_LT(i, kCases * 10) << "generator yields too few valid cases";
    const auto c = testing::random_lens_case(g);
    const Table view = get(c.lens, c.source);
    const Table edited = testing::random_view_edit(g, c.lens, view);
    const auto& ss = c.source.schema();
    const auto oracle = testing::oracle_put(testing::to_plain(c.source), ss.attrs(), ss.key(),
                                            c.lens.spec().view_attrs, c.lens.spec().view_key,
                                            testing::to_plain(edited));
    Table out;
    try {
      out = put(c.lens, c.source, edited);
    } catch (const Error& e) {
      const auto expected = e.code() == Errc::KeyConflict ? testing::PutOutcome::KeyConflict
                                                          : testing::PutOutcome::InsertNotSupported;
      ASSERT_EQ(oracle.outcome, expected) << "case " << i << ": " << e.what();
      continue;
    }
    ASSERT_EQ(oracle.outcome, testing::PutOutcome::Ok) << "case " << i;
    ASSERT_TRUE(testing::same_rows(testing::to_plain(out), oracle.rows)) << "case " << i;
    ASSERT_EQ(get(c.lens, out), edited) << "case " << i;
    ++valid;
    if (edited.size() < view.size()) ++deletes;
    for (const auto& [k, r] : edited.rows()) {
      if (view.find(k) == nullptr) {
        ++inserts;
        break;
      }
    }
  }
  EXPECT_GT(inserts, 100);
  EXPECT_GT(deletes, 100);
}

// Source rows whose view row did not change come out cell-identical.
TEST(LensProperty, Stability) {
  testing::Gen g(303);
  int checked = 0;
  for (int i = 0; i < kCases; ++i) {
    const auto c = testing::random_lens_case(g);
    const Table view = get(c.lens, c.source);
    const Table edited = testing::random_view_edit(g, c.lens, view);
    Table out;
    try {
      out = put(c.lens, c.source, edited);
    } catch (const Error&) {
      continue;
    }
    const auto& ss = c.source.schema();
    for (const auto& [key, row] : c.source.rows()) {
      KeyTuple vkey;
      for (const auto& a : c.lens.spec().view_key) vkey.push_back(row[ss.require(a)]);
      const Row* before = view.find(vkey);
      const Row* after = edited.find(vkey);
      if (before == nullptr || after == nullptr || *before != *after) continue;
      const Row* kept = out.find(key);
      ASSERT_NE(kept, nullptr) << "case " << i;
      ASSERT_EQ(*kept, row) << "case " << i;
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(LensProperty, GetMatchesProjectionOracle) {
  testing::Gen g(404);
  for (int i = 0; i < 500; ++i) {
    const auto c = testing::random_lens_case(g);
    const Table view = get(c.lens, c.source);
    const auto oracle = testing::oracle_project(testing::to_plain(c.source), c.lens.spec().view_attrs);
    ASSERT_EQ(view.size(), oracle.size());
    ASSERT_TRUE(testing::oracle_fd(testing::to_plain(c.source), c.lens.spec().view_key, c.lens.spec().view_attrs));
  }
}

}  // namespace
}  // namespace medsync
