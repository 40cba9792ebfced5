#include "medsync/error.hpp"
#include "medsync/peer.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

namespace medsync {
namespace {

using testing::fixture_d1;
using testing::fixture_d2;
using testing::fixture_d3;

struct Trio {
  PeerNode doctor{"Doctor"};
  PeerNode patient{"Patient"};
  PeerNode researcher{"Researcher"};
  ContractState contract;

  // `d23_key` selects the key of the Doctor/Researcher share.
  explicit Trio(std::vector<AttributeName> d23_key = {"a1"}) {
    doctor.add_table(fixture_d3());
    doctor.add_lens(testing::spec_l31());
    doctor.add_lens({"L32", "D3", {"a1", "a5"}, d23_key});
    patient.add_table(fixture_d1());
    patient.add_lens(testing::spec_l13());
    researcher.add_table(fixture_d2());
    researcher.add_lens({"L23", "D2", {"a1", "a5"}, d23_key});

    const Table d13 = get(doctor.lenses().at("L31"), fixture_d3()).with_id("D13");
    const Table d23 = get(doctor.lenses().at("L32"), fixture_d3()).with_id("D23");
    doctor.bind({"D13", "L31", "Patient"}, d13);
    doctor.bind({"D23", "L32", "Researcher"}, d23);
    patient.bind({"D13", "L13", "Doctor"}, d13);
    researcher.bind({"D23", "L23", "Doctor"}, d23);

    deploy_entry("D13", d13, {"Doctor", "Patient"},
                 {{"a0", {"Doctor"}}, {"a1", {"Doctor"}}, {"a2", {"Doctor", "Patient"}}, {"a4", {"Doctor"}}});
    deploy_entry("D23", d23, {"Doctor", "Researcher"},
                 {{"a1", {"Doctor", "Researcher"}}, {"a5", {"Doctor", "Researcher"}}});
  }

  void deploy_entry(const std::string& sid, const Table& view, std::set<Principal> peers,
                    std::map<AttributeName, std::set<Principal>> perm) {
    SharedTableMetadata m{sid, view.schema(), std::move(peers), std::move(perm), "Doctor", 0, 0, digest(view)};
    contract = deploy(contract, {m, "Doctor"}, 0).first;
  }

  // Runs tx through the contract and returns the receipt.
  Receipt settle(const UpdateTx& tx) {
    Verdict v = validate_update(contract, tx);
    if (v.accepted) contract = apply_update(contract, tx, 1).first;
    return Receipt{Transaction{0, tx}, v};
  }
};

void mea2_edit(PeerNode& researcher) {
  researcher.local_edit("D2", UpdateEdit{{{"a1", "MedX"}}, {{"a5", "MeA2"}}});
}

template <class T>
std::vector<T> messages_of(PeerNode& p) {
  std::vector<T> out;
  for (auto& m : p.take_outbox()) {
    if (auto* x = std::get_if<T>(&m)) out.push_back(*x);
  }
  return out;
}

bool has_event(PeerNode& p, const std::string& kind) {
  for (const auto& e : p.take_events()) {
    if (e.kind == kind) return true;
  }
  return false;
}

TEST(LocalEdit, ChangesSourceOnly) {
  Trio w;
  const Table copy = w.researcher.read_shared("D23");
  mea2_edit(w.researcher);
  EXPECT_EQ(w.researcher.tables().at("D2").find({"MedX"})->at(1), Value("MeA2"));
  EXPECT_EQ(w.researcher.read_shared("D23"), copy);
  EXPECT_TRUE(w.researcher.take_outbox().empty());
  EXPECT_TRUE(w.researcher.take_tx_outbox().empty());
}

TEST(LocalEdit, NoOpAndErrors) {
  Trio w;
  const auto tables = w.researcher.tables();
  w.researcher.local_edit("D2", UpdateEdit{{{"a1", "MedX"}}, {}});
  EXPECT_EQ(w.researcher.tables(), tables);
  EXPECT_THROW(w.researcher.local_edit("D9", DeleteEdit{{{"a1", "MedX"}}}), Error);
  EXPECT_THROW(w.researcher.local_edit("D2", DeleteEdit{{{"a1", "MedQ"}}}), Error);
  EXPECT_EQ(w.researcher.tables(), tables);
}

TEST(Propose, ChangedAttributesFromDiff) {
  Trio w;
  mea2_edit(w.researcher);
  const auto tx = w.researcher.regenerate_and_propose("D23");
  ASSERT_TRUE(tx);
  EXPECT_EQ(tx->changed_attrs, AttrSet{"a5"});
  EXPECT_EQ(tx->base_version, 0u);
  EXPECT_EQ(tx->requester, "Researcher");
  EXPECT_EQ(w.researcher.take_tx_outbox().size(), 1u);
  EXPECT_TRUE(w.researcher.has_pending());
  EXPECT_EQ(w.researcher.read_shared("D23"), w.doctor.read_shared("D23"));
}

TEST(Propose, UntouchedSourceProposesNothing) {
  Trio w;
  EXPECT_FALSE(w.researcher.regenerate_and_propose("D23"));
  EXPECT_TRUE(w.researcher.take_tx_outbox().empty());
  EXPECT_THROW(w.researcher.regenerate_and_propose("D13"), Error);
}

TEST(Propose, DeniedDosageLeavesCopies) {
  Trio w;
  w.patient.local_edit("D1", UpdateEdit{{{"a0", "P1"}, {"a1", "MedX"}}, {{"a4", "7mg"}}});
  const Table copy = w.patient.read_shared("D13");
  const auto tx = w.patient.regenerate_and_propose("D13");
  ASSERT_TRUE(tx);
  const Receipt r = w.settle(*tx);
  EXPECT_TRUE(r.verdict.rejected_for(RejectReason::PermissionDenied));
  w.patient.on_receipt(r);
  EXPECT_FALSE(w.patient.has_pending());
  EXPECT_EQ(w.patient.read_shared("D13"), copy);
  EXPECT_TRUE(w.patient.take_outbox().empty());
}

TEST(Propose, InsertAndDeleteClaimAllAttributes) {
  Trio w;
  w.patient.local_edit("D1", DeleteEdit{{{"a0", "P1"}, {"a1", "MedY"}}});
  const auto tx = w.patient.regenerate_and_propose("D13");
  ASSERT_TRUE(tx);
  EXPECT_EQ(tx->changed_attrs, (AttrSet{"a0", "a1", "a2", "a4"}));
}

TEST(Receipt, AcceptInstallsPendingView) {
  Trio w;
  mea2_edit(w.researcher);
  const auto tx = *w.researcher.regenerate_and_propose("D23");
  w.researcher.on_receipt(w.settle(tx));
  EXPECT_FALSE(w.researcher.has_pending());
  EXPECT_EQ(w.researcher.shares().at("D23").version, 1u);
  EXPECT_EQ(digest(w.researcher.read_shared("D23")), tx.new_digest);
}

TEST(Receipt, StaleRequestsLatestFromCounterpart) {
  Trio w;
  mea2_edit(w.researcher);
  const auto first = *w.researcher.regenerate_and_propose("D23");
  w.researcher.on_receipt(w.settle(first));

  w.doctor.local_edit("D3", UpdateEdit{{{"a0", "P1"}, {"a1", "MedY"}}, {{"a5", "MeA8"}}});
  const auto stale = *w.doctor.regenerate_and_propose("D23");
  const Receipt r = w.settle(stale);
  ASSERT_TRUE(r.verdict.rejected_for(RejectReason::StaleVersion));
  w.doctor.on_receipt(r);
  const auto reqs = messages_of<DataRequest>(w.doctor);
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0].to, "Researcher");
  EXPECT_EQ(reqs[0].requested_version, 1u);
  EXPECT_TRUE(w.doctor.shares().at("D23").needs_repropose);
}

TEST(Notification, DoctorAsksResearcher) {
  Trio w;
  w.doctor.on_notification({"D23", "Doctor", 1, sha256("x"), {"a5"}, "Researcher", 0});
  const auto reqs = messages_of<DataRequest>(w.doctor);
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0].to, "Researcher");
  EXPECT_EQ(reqs[0].requested_version, 1u);
  w.doctor.on_notification({"D23", "Doctor", 1, sha256("x"), {"a5"}, "Researcher", 0});
  EXPECT_TRUE(w.doctor.take_outbox().empty());
}

TEST(Notification, PatientAsksDoctor) {
  Trio w;
  w.patient.on_notification({"D13", "Patient", 1, sha256("x"), {"a4"}, "Doctor", 0});
  EXPECT_EQ(messages_of<DataRequest>(w.patient).at(0).to, "Doctor");
}

TEST(Notification, UnboundShare) {
  Trio w;
  try {
    w.patient.on_notification({"D23", "Patient", 1, sha256("x"), {"a5"}, "Researcher", 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownShared);
  }
}

TEST(DataRequest, ServeNotReadyRefuse) {
  Trio w;
  mea2_edit(w.researcher);
  w.researcher.on_receipt(w.settle(*w.researcher.regenerate_and_propose("D23")));
  const DataResponse resp = w.researcher.on_data_request({"D23", 1, "Doctor", "Researcher"});
  EXPECT_EQ(resp.version, 1u);
  EXPECT_EQ(resp.table.find({"MedX"})->at(1), Value("MeA2"));

  auto code = [&](const DataRequest& r) {
    try {
      w.researcher.on_data_request(r);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoError;
  };
  EXPECT_EQ(code({"D23", 2, "Doctor", "Researcher"}), Errc::NotReady);
  EXPECT_EQ(code({"D23", 1, "Patient", "Researcher"}), Errc::Refused);
}

// Researcher proposes; Doctor fetches, puts into D3 and checks D13.
DataResponse researcher_update(Trio& w) {
  const auto tx = *w.researcher.regenerate_and_propose("D23");
  w.researcher.on_receipt(w.settle(tx));
  return w.researcher.on_data_request({"D23", 1, "Doctor", "Researcher"});
}

TEST(DataResponse, DoctorPutsWithoutCascade) {
  Trio w;
  mea2_edit(w.researcher);
  const DataResponse resp = researcher_update(w);
  const auto cascades = w.doctor.on_data_response(resp, w.contract.at("D23"));
  EXPECT_TRUE(cascades.empty());

  const Table& d3 = w.doctor.tables().at("D3");
  EXPECT_EQ(d3.find({"P1", "MedX"})->at(4), Value("MeA2"));
  EXPECT_EQ(d3.find({"P2", "MedX"})->at(4), Value("MeA2"));
  EXPECT_EQ(d3.find({"P1", "MedY"})->at(4), Value("MeA9"));
  EXPECT_EQ(w.doctor.read_shared("D23"), w.researcher.read_shared("D23"));

  bool checked = false;
  for (const auto& e : w.doctor.take_events()) {
    if (e.kind == "dep_check") {
      checked = true;
      EXPECT_EQ(e.detail["overlap"], nlohmann::json({"a1"}));
      EXPECT_FALSE(e.detail["differs"].get<bool>());
    }
    EXPECT_NE(e.kind, "cascade");
  }
  EXPECT_TRUE(checked);
}

TEST(DataResponse, RenameCascadesToPatient) {
  Trio w({"a5"});
  w.researcher.local_edit("D2", DeleteEdit{{{"a1", "MedX"}}});
  w.researcher.local_edit("D2", InsertEdit{{{"a1", "MedW"}, {"a5", "MeA1"}, {"a6", "MoA1"}}});
  const DataResponse resp = researcher_update(w);
  const auto cascades = w.doctor.on_data_response(resp, w.contract.at("D23"));
  ASSERT_EQ(cascades.size(), 1u);
  EXPECT_EQ(cascades[0].shared_id, "D13");
  EXPECT_EQ(cascades[0].hops, 1u);
  EXPECT_TRUE(has_event(w.doctor, "cascade"));

  w.doctor.on_receipt(w.settle(cascades[0]));
  const DataResponse d13 = w.doctor.on_data_request({"D13", 1, "Patient", "Doctor"});
  w.patient.on_data_response(d13, w.contract.at("D13"));
  const Table& d1 = w.patient.tables().at("D1");
  EXPECT_NE(d1.find({"P1", "MedW"}), nullptr);
  EXPECT_EQ(d1.find({"P1", "MedX"}), nullptr);
  EXPECT_TRUE(d1.find({"P1", "MedW"})->at(3).is_null());
  EXPECT_EQ(w.patient.derived_view("D13"), w.doctor.read_shared("D13"));
}

TEST(DataResponse, DigestMismatchDiscardsAndReRequests) {
  Trio w;
  mea2_edit(w.researcher);
  DataResponse resp = researcher_update(w);
  const PeerNode before = w.doctor;
  resp.table = update_row(resp.table, {{"a1", "MedY"}}, {{"a5", "forged"}});
  w.doctor.on_data_response(resp, w.contract.at("D23"));
  EXPECT_EQ(w.doctor.tables(), before.tables());
  EXPECT_EQ(w.doctor.read_shared("D23"), before.read_shared("D23"));
  EXPECT_TRUE(has_event(w.doctor, "digest_mismatch"));
  EXPECT_EQ(messages_of<DataRequest>(w.doctor).size(), 1u);
}

TEST(DataResponse, ThirdPartyResponseRefused) {
  Trio w;
  mea2_edit(w.researcher);
  DataResponse resp = researcher_update(w);
  resp.shared_id = "D13";
  resp.from = "Researcher";
  const PeerNode before = w.patient;
  resp.to = "Patient";
  w.patient.on_data_response(resp, w.contract.at("D13"));
  EXPECT_TRUE(w.patient == before);
}

TEST(DataResponse, UnpushedLocalEditsAreMerged) {
  Trio w;
  mea2_edit(w.researcher);
  const DataResponse resp = researcher_update(w);
  w.doctor.local_edit("D3", UpdateEdit{{{"a0", "P1"}, {"a1", "MedY"}}, {{"a5", "MeA8"}}});
  w.doctor.on_data_response(resp, w.contract.at("D23"));
  const Table& d3 = w.doctor.tables().at("D3");
  EXPECT_EQ(d3.find({"P1", "MedX"})->at(4), Value("MeA2"));
  EXPECT_EQ(d3.find({"P1", "MedY"})->at(4), Value("MeA8"));
}

TEST(ReadShared, Cases) {
  Trio w;
  EXPECT_EQ(w.patient.read_shared("D13"), w.doctor.read_shared("D13"));
  EXPECT_EQ(w.patient.read_shared("D13").id(), "D13");
  EXPECT_THROW(w.patient.read_shared("D23"), Error);
}

TEST(MergeViews, LocalOnlyCellsSurvive) {
  const Schema s({"k", "x", "y"}, {"k"});
  auto t = [&](std::initializer_list<Row> rows) {
    TableBuilder b("T", s);
    for (const auto& r : rows) b.add(r);
    return std::move(b).build();
  };
  const Table base = t({{"1", "a", "b"}, {"2", "c", "d"}});
  const Table local = t({{"1", "A", "b"}, {"2", "c", "d"}, {"3", "n", "n"}});
  const Table remote = t({{"1", "a", "B"}});
  EXPECT_EQ(merge_views(base, local, remote), t({{"1", "A", "B"}, {"3", "n", "n"}}));
  EXPECT_EQ(merge_views(base, base, remote), remote);
  EXPECT_EQ(changed_attributes(base, local), (AttrSet{"k", "x", "y"}));
}

TEST(PeerState, JsonRestoreRoundTrip) {
  Trio w;
  mea2_edit(w.researcher);
  w.researcher.regenerate_and_propose("D23");
  w.researcher.take_events();
  w.researcher.take_tx_outbox();
  const auto state = w.researcher.state_to_json();
  std::map<std::string, Table> copies{{"D23", w.researcher.read_shared("D23")}};
  const PeerNode back =
      PeerNode::restore(state, {w.researcher.tables().at("D2")}, copies, 16);
  EXPECT_TRUE(back == w.researcher);
  EXPECT_EQ(back.state_to_json(), state);
}

TEST(Messages, JsonRoundTrip) {
  Trio w;
  mea2_edit(w.researcher);
  const DataResponse resp = researcher_update(w);
  const std::vector<Message> msgs{
      Notification{"D23", "Doctor", 1, sha256("x"), {"a5"}, "Researcher", 2},
      DataRequest{"D23", 1, "Doctor", "Researcher"},
      resp,
      Receipt{Transaction{4, UpdateTx{"D23", "Doctor", {"a1"}, 0, sha256("y"), 0}}, Verdict::accept()},
  };
  for (const auto& m : msgs) {
    const auto j = message_to_json(m);
    EXPECT_EQ(j["kind"], std::string(message_kind(m)));
    EXPECT_EQ(message_from_json(j), m);
  }
  for (const Edit& e : {Edit{InsertEdit{{{"a1", "M"}}}}, Edit{UpdateEdit{{{"a1", "M"}}, {{"a5", Value::null()}}}},
                        Edit{DeleteEdit{{{"a1", "M"}}}}}) {
    EXPECT_EQ(edit_to_json(edit_from_json(edit_to_json(e))), edit_to_json(e));
  }
}

}  // namespace
}  // namespace medsync
