#include "medsync/error.hpp"
#include "medsync/sim.hpp"

#include <algorithm>

namespace medsync {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void invalid(const std::string& where, const std::string& what) {
  throw Error(Errc::ValidationError, where + ": " + what);
}

SimConfig config_from_json(const nlohmann::json& j) {
  SimConfig c;
  c.max_ticks = j.value("max_ticks", c.max_ticks);
  c.seed = j.value("seed", c.seed);
  c.network_delay_ticks = j.value("network_delay_ticks", c.network_delay_ticks);
  c.blocks_per_tick = j.value("blocks_per_tick", c.blocks_per_tick);
  c.max_cascade_hops = j.value("max_cascade_hops", c.max_cascade_hops);
  if (c.network_delay_ticks == 0) invalid("config", "network_delay_ticks must be at least 1");
  if (c.blocks_per_tick == 0) invalid("config", "blocks_per_tick must be at least 1");
  return c;
}

// Structural checks that need no table contents.
void validate(const Scenario& s) {
  std::set<Principal> principals;
  for (const auto& p : s.peers) principals.insert(p.principal);

  std::map<std::string, std::vector<std::pair<Principal, const ShareBinding*>>> sides;
  for (const auto& p : s.peers) {
    std::set<std::string> tables, lenses;
    for (const auto& t : p.tables) tables.insert(t.id());
    for (const auto& l : p.lenses) {
      if (!tables.contains(l.source_table_id)) {
        invalid("peers." + p.principal + ".lenses." + l.lens_id, "unknown source table '" + l.source_table_id + "'");
      }
      lenses.insert(l.lens_id);
    }
    for (const auto& b : p.bindings) {
      const std::string where = "peers." + p.principal + ".bindings." + b.shared_id;
      if (!b.lens_id.empty() && !lenses.contains(b.lens_id)) invalid(where, "unknown lens '" + b.lens_id + "'");
      if (!principals.contains(b.counterpart)) invalid(where, "unknown counterpart '" + b.counterpart + "'");
      if (b.counterpart == p.principal) invalid(where, "a peer cannot share with itself");
      sides[b.shared_id].emplace_back(p.principal, &b);
    }
  }

  std::set<std::string> deployed;
  for (std::size_t i = 0; i < s.deployments.size(); ++i) {
    const Deployment& d = s.deployments[i];
    const std::string where = "deployments[" + std::to_string(i) + "]";
    if (!principals.contains(d.deployer)) invalid(where, "unknown deployer '" + d.deployer + "'");
    for (const auto& p : d.peers) {
      if (!principals.contains(p)) invalid(where, "unknown peer '" + p + "'");
    }
    const auto it = sides.find(d.shared_id);
    if (it == sides.end() || it->second.size() != 2) {
      invalid(where, "'" + d.shared_id + "' needs a binding on exactly two peers");
    }
    const auto& [pa, ba] = it->second[0];
    const auto& [pb, bb] = it->second[1];
    if (ba->counterpart != pb || bb->counterpart != pa) invalid(where, "bindings of '" + d.shared_id + "' disagree");
    if (d.peers != std::set<Principal>{pa, pb}) invalid(where, "peers differ from the bound principals");
    if (!deployed.insert(d.shared_id).second) invalid(where, "'" + d.shared_id + "' deployed twice");
  }
  for (const auto& [sid, bound] : sides) {
    if (!deployed.contains(sid)) invalid("peers." + bound.front().first + ".bindings." + sid, "no deployment");
  }

  Tick last = 0;
  for (std::size_t i = 0; i < s.script.size(); ++i) {
    const ScheduledAction& a = s.script[i];
    const std::string where = "script[" + std::to_string(i) + "]";
    if (a.tick < last) invalid(where, "ticks must be non-decreasing");
    last = a.tick;
    const auto peer = std::find_if(s.peers.begin(), s.peers.end(),
                                   [&](const PeerSetup& p) { return p.principal == a.principal; });
    if (peer == s.peers.end()) invalid(where, "unknown principal '" + a.principal + "'");
    auto bound = [&](const std::string& sid) {
      return std::any_of(peer->bindings.begin(), peer->bindings.end(),
                         [&](const ShareBinding& b) { return b.shared_id == sid; });
    };
    std::visit(overloaded{
                   [&](const EditAction& e) {
                     const bool known = std::any_of(peer->tables.begin(), peer->tables.end(),
                                                    [&](const Table& t) { return t.id() == e.table; });
                     if (!known) invalid(where, "unknown table '" + e.table + "'");
                   },
                   [&](const ProposeAction& p) {
                     if (!bound(p.shared_id)) invalid(where, "unbound shared table '" + p.shared_id + "'");
                   },
                   [&](const GrantAction& g) {
                     if (!bound(g.shared_id)) invalid(where, "unbound shared table '" + g.shared_id + "'");
                   },
               },
               a.action);
  }
}

}  // namespace

nlohmann::json action_to_json(const ScheduledAction& action) {
  nlohmann::json j = std::visit(
      overloaded{
          [](const EditAction& e) {
            nlohmann::json out = edit_to_json(e.edit);
            out["action"] = "edit";
            out["table"] = e.table;
            return out;
          },
          [](const ProposeAction& p) -> nlohmann::json {
            return {{"action", "propose"}, {"shared_id", p.shared_id}};
          },
          [](const GrantAction& g) -> nlohmann::json {
            return {{"action", "grant"}, {"shared_id", g.shared_id}, {"attr", g.attr}, {"principals", g.principals}};
          },
      },
      action.action);
  j["tick"] = action.tick;
  j["principal"] = action.principal;
  return j;
}

ScheduledAction action_from_json(const nlohmann::json& doc) {
  try {
    ScheduledAction a;
    a.tick = doc.at("tick").get<Tick>();
    a.principal = doc.at("principal").get<Principal>();
    const auto kind = doc.at("action").get<std::string>();
    if (kind == "edit") {
      a.action = EditAction{doc.at("table").get<std::string>(), edit_from_json(doc)};
    } else if (kind == "propose") {
      a.action = ProposeAction{doc.at("shared_id").get<std::string>()};
    } else if (kind == "grant") {
      a.action = GrantAction{doc.at("shared_id").get<std::string>(), doc.at("attr").get<AttributeName>(),
                             doc.at("principals").get<std::set<Principal>>()};
    } else {
      throw Error(Errc::ParseError, "unknown action '" + kind + "'");
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("action: ") + e.what());
  }
}

Scenario parse_scenario(const nlohmann::json& doc) {
  Scenario s;
  try {
    s.name = doc.value("name", std::string{"scenario"});
    s.config = config_from_json(doc.value("config", nlohmann::json::object()));
    const auto principals = doc.at("principals").get<std::set<Principal>>();
    const auto& peers = doc.value("peers", nlohmann::json::object());
    for (const auto& [name, body] : peers.items()) {
      if (!principals.contains(name)) invalid("peers." + name, "not a declared principal");
    }
    for (const auto& principal : principals) {
      PeerSetup setup;
      setup.principal = principal;
      if (peers.contains(principal)) {
        const auto& body = peers.at(principal);
        for (const auto& t : body.value("tables", nlohmann::json::array())) setup.tables.push_back(table_from_json(t));
        for (const auto& l : body.value("lenses", nlohmann::json::array())) {
          setup.lenses.push_back(lens_spec_from_json(l));
        }
        for (const auto& b : body.value("bindings", nlohmann::json::array())) {
          setup.bindings.push_back(ShareBinding{b.at("shared_id").get<std::string>(),
                                                b.value("lens_id", std::string{}),
                                                b.at("counterpart").get<Principal>()});
        }
      }
      s.peers.push_back(std::move(setup));
    }
    for (const auto& d : doc.value("deployments", nlohmann::json::array())) {
      Deployment dep;
      dep.deployer = d.at("deployer").get<Principal>();
      dep.shared_id = d.at("shared_id").get<std::string>();
      dep.peers = d.at("peers").get<std::set<Principal>>();
      for (const auto& [attr, who] : d.at("perm").items()) dep.perm[attr] = who.get<std::set<Principal>>();
      dep.authority = d.at("authority").get<Principal>();
      s.deployments.push_back(std::move(dep));
    }
    for (const auto& a : doc.value("script", nlohmann::json::array())) s.script.push_back(action_from_json(a));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("scenario: ") + e.what());
  }
  validate(s);
  World probe(s);  // table-level checks: lenses compile, FDs hold, initial views agree
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  return parse_scenario(doc);
}

}  // namespace medsync
