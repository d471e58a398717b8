#include <fstream>
#include <string_view>

#include "bench/json_types.hpp"
#include "conav/server.hpp"

namespace conav {

namespace {

using nlohmann::json;

std::atomic<long long> g_next_session{1};

json pose_json(RobotPose p) { return {{"cell", p.cell}, {"heading", std::string(1, direction_letter(p.heading))}}; }

json map_rows(const LabelGrid& labels) {
  json rows = json::array();
  for (int r = 0; r < labels.height(); ++r) {
    std::string row;
    for (int c = 0; c < labels.width(); ++c) row += labels.at(r, c) == CellLabel::Wall ? '#' : '.';
    rows.push_back(std::move(row));
  }
  return rows;
}

json cells_of(const Grid<std::uint8_t>& mask) {
  json out = json::array();
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask.data()[i]) out.push_back(mask.cell_at(i));
  return out;
}

json input_json(const HumanInput& in) {
  if (in.kind == HumanInput::Kind::Guidance) return {{"kind", "guidance"}, {"turn", in.turn}, {"cells", in.guidance.cells}};
  return {{"kind", "map_edit"}, {"turn", in.turn}, {"adds", cells_of(in.edit.add)}, {"removes", cells_of(in.edit.remove)}};
}

EditMask mask_from(const json& adds, const json& removes, int height, int width) {
  EditMask m(height, width);
  auto fill = [&](const json& list, Grid<std::uint8_t>& g) {
    if (!list.is_array()) throw Error(ErrorCode::ProtocolError, "cell lists must be arrays");
    for (const json& j : list) {
      const Cell c = j.get<Cell>();
      if (!g.in_bounds(c)) throw Error(ErrorCode::InvalidEdit, "edit cell outside the map");
      g[c] = 1;
    }
  };
  fill(adds, m.add);
  fill(removes, m.remove);
  return m;
}

HumanInput input_from_json(const json& j, int height, int width) {
  HumanInput in;
  in.turn = j.at("turn").get<int>();
  if (j.at("kind") == "guidance") {
    in.kind = HumanInput::Kind::Guidance;
    in.guidance.cells = j.at("cells").get<std::vector<Cell>>();
  } else {
    in.kind = HumanInput::Kind::MapEdit;
    in.edit = mask_from(j.at("adds"), j.at("removes"), height, width);
  }
  return in;
}

}  // namespace

struct SessionHub::Session {
  std::string id;
  EpisodeConfig config;
  std::unique_ptr<PerceptionModel> model;
  std::unique_ptr<Episode> episode;
  json messages = json::array();
  std::string status = "open";
  long long last_ack = 0;
};

struct SessionHub::Outbox {
  SessionHub& hub;
  Session* session = nullptr;
  std::vector<std::string> messages;

  void send(const std::string& type, const std::string& session_id, json body) {
    body["v"] = kProtocolVersion;
    body["type"] = type;
    body["session"] = session_id;
    body["seq"] = ++hub.seq_;
    if (session != nullptr) session->messages.push_back({{"dir", "out"}, {"msg", body}});
    messages.push_back(body.dump());
  }
};

SessionHub::SessionHub(ServerOptions options) : options_(std::move(options)) {}

SessionHub::~SessionHub() { disconnect(); }

std::size_t SessionHub::open_sessions() const {
  std::size_t n = 0;
  for (const auto& [id, s] : sessions_) n += s->status == "open";
  return n;
}

std::vector<std::string> SessionHub::session_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

std::string SessionHub::session_log(const std::string& id) const {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::SessionError, "unknown session '" + id + "'");
  const Session& s = *it->second;
  json inputs = json::array();
  for (const HumanInput& in : s.episode->human_inputs()) inputs.push_back(input_json(in));
  json log = {{"v", kProtocolVersion},
              {"id", s.id},
              {"status", s.status},
              {"config", config_to_json(s.config)},
              {"inputs", std::move(inputs)},
              {"metrics", s.episode->metrics()},
              {"messages", s.messages}};
  return log.dump(2);
}

void SessionHub::close(Session& s, const std::string& status) {
  if (s.status != "open") return;
  s.status = status;
  if (options_.log_dir.empty()) return;
  std::filesystem::create_directories(options_.log_dir);
  std::ofstream f(options_.log_dir / (s.id + ".json"));
  f << session_log(s.id) << '\n';
  if (!f) throw Error(ErrorCode::IoError, "cannot write session log for " + s.id);
}

void SessionHub::disconnect() {
  for (auto& [id, s] : sessions_) {
    try {
      close(*s, "disconnected");
    } catch (const Error&) {
      // a failing log write must not prevent closing the others
    }
  }
}

void SessionHub::advance(Session& s, Outbox& out) {
  Episode& ep = *s.episode;
  auto flush_frames = [&] {
    for (Frame& f : ep.take_frames()) {
      json labels = json::array();
      for (const CellLabel l : f.observation.labels) labels.push_back(l == CellLabel::Wall ? "wall" : "free");
      out.send("transmission", s.id,
               {{"camera", pose_json(f.observation.camera)},
                {"visible", f.observation.visible},
                {"labels", std::move(labels)},
                {"path", f.path},
                {"streamed", f.streamed}});
    }
  };
  while (ep.phase() == Episode::Phase::RobotTurn) {
    ep.robot_turn();
    out.send("robot_state", s.id, {{"pose", pose_json(ep.pose())}, {"step", ep.metrics().steps}});
    flush_frames();
  }
  flush_frames();
  if (ep.phase() == Episode::Phase::AwaitingGuidance) {
    out.send("awaiting_guidance", s.id, {{"goals", ep.unclaimed_goals()}});
  } else {
    json m = ep.metrics();
    m.erase("turns");
    out.send("metrics", s.id, std::move(m));
    close(s, "finished");
  }
}

void SessionHub::create_session(const std::string& config_text, Outbox& out) {
  EpisodeConfig config = episode_config_from_json(config_text);
  if (config.world != WorldKind::Discrete) {
    throw Error(ErrorCode::InvalidConfiguration, "live sessions run the discrete world");
  }
  config.human = HumanKind::Live;
  auto s = std::make_unique<Session>();
  s->id = "s" + std::to_string(g_next_session++);
  s->config = config;
  if (config.policy == PolicyKind::IgMcts) s->model = make_model(config.model, config.synthetic_human);
  s->episode = std::make_unique<Episode>(config, s->model.get());
  Session& ref = *s;
  const std::string id = s->id;
  sessions_.emplace(id, std::move(s));
  out.session = &ref;
  const Episode& ep = *ref.episode;
  out.send("session", ref.id,
           {{"id", ref.id},
            {"human_map", map_rows(ep.human_map().labels)},
            {"goals", ep.maze().goals},
            {"pose", pose_json(ep.pose())},
            {"policy", to_string(config.policy)},
            {"step_budget", config.step_budget}});
  advance(ref, out);
}

std::vector<std::string> SessionHub::handle(const std::string& message) {
  Outbox out{*this, nullptr, {}};
  json msg;
  std::string session_id;
  json seq = nullptr;
  try {
    try {
      msg = json::parse(message);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ProtocolError, std::string("malformed JSON: ") + e.what());
    }
    if (!msg.is_object()) throw Error(ErrorCode::ProtocolError, "a message must be a JSON object");
    if (msg.contains("seq")) seq = msg["seq"];
    if (msg.contains("session") && msg["session"].is_string()) session_id = msg["session"].get<std::string>();
    if (!msg.contains("type") || !msg["type"].is_string()) throw Error(ErrorCode::ProtocolError, "missing type");
    if (msg.value("v", kProtocolVersion) != kProtocolVersion) {
      throw Error(ErrorCode::ProtocolError, "unsupported protocol version");
    }
    const std::string type = msg["type"].get<std::string>();

    if (type == "create_session") {
      const json config = msg.value("config", json::object());
      if (!config.is_object()) throw Error(ErrorCode::ProtocolError, "config must be an object");
      create_session(config.dump(), out);
      out.session->messages.insert(out.session->messages.begin(), {{"dir", "in"}, {"msg", msg}});
      return out.messages;
    }

    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error(ErrorCode::SessionError, "unknown session '" + session_id + "'");
    Session& s = *it->second;
    out.session = &s;
    s.messages.push_back({{"dir", "in"}, {"msg", msg}});
    if (s.status != "open") throw Error(ErrorCode::SessionError, "session " + s.id + " is " + s.status);
    Episode& ep = *s.episode;

    try {
      if (type == "guidance") {
        if (!msg.contains("cells")) throw Error(ErrorCode::ProtocolError, "guidance needs cells");
        std::vector<Cell> cells;
        try {
          cells = msg["cells"].get<std::vector<Cell>>();
        } catch (const json::exception& e) {
          throw Error(ErrorCode::ProtocolError, std::string("bad cells: ") + e.what());
        }
        ep.submit_guidance({std::move(cells), 0});
        advance(s, out);
      } else if (type == "map_edit") {
        const EditMask edit = mask_from(msg.value("adds", json::array()), msg.value("removes", json::array()),
                                        ep.maze().height(), ep.maze().width());
        ep.apply_map_edit(edit);
      } else if (type == "ack") {
        if (!msg.contains("seq") || !msg["seq"].is_number_integer()) {
          throw Error(ErrorCode::ProtocolError, "ack needs an integer seq");
        }
        s.last_ack = std::max(s.last_ack, msg["seq"].get<long long>());
      } else {
        throw Error(ErrorCode::ProtocolError, "unknown message type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ProtocolError, e.what());
    }
  } catch (const Error& e) {
    out.send("error", session_id, {{"code", std::string(to_string(e.code()))}, {"msg", e.what()}, {"re", seq}});
  } catch (const std::exception& e) {
    out.send("error", session_id, {{"code", "protocol-error"}, {"msg", e.what()}, {"re", seq}});
  }
  return out.messages;
}

EpisodeMetrics replay_session_log(const std::string& log_text, EpisodeMetrics* logged, const PerceptionModel* model) {
  json log;
  try {
    log = json::parse(log_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("unreadable session log: ") + e.what());
  }
  EpisodeConfig config = config_from_json(log.at("config"));
  const int size = config.maze_size;
  std::vector<HumanInput> inputs;
  for (const json& j : log.at("inputs")) inputs.push_back(input_from_json(j, size, size));
  if (logged != nullptr) *logged = log.at("metrics").get<EpisodeMetrics>();
  return replay_episode(config, inputs, model, log.at("status") != "finished");
}

}  // namespace conav
