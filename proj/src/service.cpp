#include "sparseseg/service.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <random>

#include "httplib.h"
#include "json.hpp"
#include "sparseseg/augment.hpp"

namespace sparseseg::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad_request(const std::string& message) { throw ApiError(400, "invalid_request", message); }

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, int(ms));
  return buf;
}

std::string new_session_id() {
  std::random_device rd;
  std::string id;
  static constexpr char kHex[] = "0123456789abcdef";
  for (int i = 0; i < 32; ++i) id.push_back(kHex[rd() & 15u]);
  return id;
}

std::optional<SubmitMode> parse_mode(std::string_view s) {
  if (s == "strict") return SubmitMode::Strict;
  if (s == "free") return SubmitMode::Free;
  return std::nullopt;
}

// Atomic replace so a crash never leaves a torn label log.
void write_atomic(const fs::path& path, std::string_view contents) {
  const fs::path tmp = path.string() + ".tmp";
  io::write_file(tmp, contents);
  fs::rename(tmp, path);
}

json options_json(const std::string& id, const SessionOptions& o, ProviderMode provider) {
  json fallback = {{"superpixels", o.fallback.superpixels},
                   {"merge_threshold", o.fallback.merge_threshold},
                   {"compactness", o.fallback.compactness},
                   {"iterations", o.fallback.iterations}};
  fallback["min_area"] = o.fallback.min_area ? json(*o.fallback.min_area) : json(nullptr);
  return {{"id", id},
          {"strategy", to_string(o.sampler.strategy)},
          {"lambda", o.sampler.lambda},
          {"random_ratio", o.sampler.random_ratio},
          {"budget", o.sampler.budget},
          {"seed", o.sampler.seed},
          {"mode", to_string(o.mode)},
          {"overlay_opacity", o.overlay_opacity},
          {"provider", to_string(provider)},
          {"superpixels",
           {{"K", o.superpixels.superpixels},
            {"compactness", o.superpixels.compactness},
            {"iterations", o.superpixels.iterations}}},
          {"fallback", fallback},
          {"engine_version", kEngineVersion}};
}

SessionOptions options_from_json(const json& j) {
  SessionOptions o;
  const auto strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (!strategy) throw Error(ErrorKind::InvalidArgument, "unknown strategy in session config");
  o.sampler.strategy = *strategy;
  o.sampler.lambda = j.at("lambda").get<double>();
  o.sampler.random_ratio = j.at("random_ratio").get<double>();
  o.sampler.budget = j.at("budget").get<int>();
  o.sampler.seed = j.at("seed").get<std::uint64_t>();
  o.mode = parse_mode(j.at("mode").get<std::string>()).value_or(SubmitMode::Strict);
  o.overlay_opacity = j.at("overlay_opacity").get<double>();
  const json& sp = j.at("superpixels");
  o.superpixels = {sp.at("K").get<int>(), sp.at("compactness").get<double>(), sp.at("iterations").get<int>()};
  const json& fb = j.at("fallback");
  o.fallback.superpixels = fb.at("superpixels").get<int>();
  o.fallback.merge_threshold = fb.at("merge_threshold").get<double>();
  o.fallback.compactness = fb.at("compactness").get<double>();
  o.fallback.iterations = fb.at("iterations").get<int>();
  if (!fb.at("min_area").is_null()) o.fallback.min_area = fb.at("min_area").get<std::size_t>();
  return o;
}

}  // namespace

std::string_view to_string(SubmitMode mode) { return mode == SubmitMode::Strict ? "strict" : "free"; }

// ----------------------------------------------------------------------------
// Session

std::shared_ptr<Session> Session::create(const fs::path& dir, std::string id, const io::Bytes& image_png,
                                         const LabelSchema& schema, const SessionOptions& options,
                                         std::optional<ProposalSet> proposals) {
  std::shared_ptr<Session> s(new Session());
  s->dir_ = dir;
  s->id_ = std::move(id);
  s->options_ = options;
  s->schema_ = schema;
  try {
    s->image_ = io::decode_rgb_png(image_png);
    schema.validate();
    options.sampler.validate();
    if (std::size_t(options.sampler.budget) > s->dims().pixel_count()) {
      throw Error(ErrorKind::InvalidArgument, "budget exceeds the pixel count");
    }
    if (!(options.overlay_opacity >= 0.0 && options.overlay_opacity <= 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "overlay_opacity must lie in [0,1]");
    }
    if (proposals) {
      if (proposals->dims != s->dims()) throw Error(ErrorKind::DimsMismatch, "proposal dims differ from image");
      s->provider_mode_ = ProviderMode::File;
    } else {
      proposals = generate_fallback_proposals(s->image_, options.fallback);
      s->provider_mode_ = ProviderMode::Fallback;
    }
  } catch (const Error& e) {
    bad_request(e.what());
  }
  s->proposals_ = std::make_shared<const ProposalSet>(std::move(*proposals));
  s->provider_ = std::make_unique<FileProposalProvider>(*s->proposals_);
  s->superpixels_ = std::make_unique<SuperpixelMap>(slic_segment(s->image_, options.superpixels));

  fs::create_directories(dir);
  io::write_file(dir / "image.png", image_png);
  io::write_file(dir / "schema.json", io::format_schema_json(schema));
  io::write_file(dir / "proposals.json", format_manifest(*s->proposals_));
  io::write_file(dir / "config.json", options_json(s->id_, options, s->provider_mode_).dump(2) + "\n");
  s->created_ = s->updated_ = now_iso8601();
  s->rebuild(PointLabelSet{});
  s->persist_labels();
  s->touch();
  return s;
}

std::shared_ptr<Session> Session::load(const fs::path& dir) {
  std::shared_ptr<Session> s(new Session());
  s->dir_ = dir;
  const io::Bytes config_bytes = io::read_file(dir / "config.json");
  const json config = json::parse(config_bytes.begin(), config_bytes.end());
  s->id_ = config.at("id").get<std::string>();
  s->options_ = options_from_json(config);
  s->provider_mode_ = config.at("provider") == "fallback" ? ProviderMode::Fallback : ProviderMode::File;
  s->image_ = io::read_rgb_png(dir / "image.png");
  s->schema_ = io::read_schema(dir / "schema.json");
  s->proposals_ = std::make_shared<const ProposalSet>(load_proposals(dir / "proposals.json", s->dims()));
  s->provider_ = std::make_unique<FileProposalProvider>(*s->proposals_);
  s->superpixels_ = std::make_unique<SuperpixelMap>(slic_segment(s->image_, s->options_.superpixels));
  const PointLabelSet labels =
      io::to_point_set(io::read_points_csv(dir / "labels.csv"), s->dims(), s->schema_.class_count());
  s->rebuild(labels);
  if (fs::exists(dir / "times.json")) {
    const io::Bytes t = io::read_file(dir / "times.json");
    const json times = json::parse(t.begin(), t.end());
    s->created_ = times.value("created", "");
    s->updated_ = times.value("updated", "");
  }
  return s;
}

// The suggester is always asked for a suggestion before a commit, so the
// state is a pure function of the label prefix and the seed.
void Session::rebuild(const PointLabelSet& labels) {
  suggester_ = std::make_unique<PointSuggester>(options_.sampler, dims(), proposals_);
  for (const PointLabel& p : labels) {
    suggester_->suggest();
    suggester_->commit(p.point, p.label);
  }
  publish(suggester_->selected());
}

void Session::publish(const PointLabelSet& labels) {
  auto snap = std::make_shared<Snapshot>();
  snap->labels = labels;
  if (!labels.empty()) snap->segmentation = std::make_shared<const LabelMap>(augment(*superpixels_, labels, *provider_));
  snapshot_ = std::move(snap);
}

void Session::persist_labels() const { write_atomic(dir_ / "labels.csv", io::format_points_csv(snapshot_->labels)); }

void Session::touch() {
  updated_ = now_iso8601();
  write_atomic(dir_ / "times.json", json{{"created", created_}, {"updated", updated_}}.dump(2) + "\n");
}

Progress Session::progress() const { return {int(suggester_->selected().size()), options_.sampler.budget}; }

PendingPoint Session::next_point() {
  std::lock_guard lock(mutex_);
  if (suggester_->done()) throw ApiError(409, "budget_exhausted", "all points of the budget are labeled");
  const Suggestion s = suggester_->suggest();
  return {s.point, s.phase, progress()};
}

bool Session::submit(PixelCoord p, int label) {
  std::lock_guard lock(mutex_);
  if (suggester_->done()) throw ApiError(409, "budget_exhausted", "all points of the budget are labeled");
  if (label < 0 || label >= schema_.class_count()) {
    throw ApiError(422, "invalid_label",
                   "label " + std::to_string(label) + " outside [0, " + std::to_string(schema_.class_count()) + ")");
  }
  const Suggestion pending = suggester_->suggest();
  if (options_.mode == SubmitMode::Strict) {
    if (p != pending.point) {
      throw ApiError(409, "coordinate_mismatch",
                     "expected the pending point (" + std::to_string(pending.point.x) + "," +
                         std::to_string(pending.point.y) + ")");
    }
  } else {
    if (!in_bounds(dims(), p)) bad_request("point outside the image");
    if (suggester_->selected().contains(p)) throw ApiError(409, "already_labeled", "pixel already labeled");
  }
  suggester_->commit(p, ClassId(label));
  publish(suggester_->selected());
  persist_labels();
  touch();
  return !suggester_->done();
}

std::size_t Session::undo() {
  std::lock_guard lock(mutex_);
  PointLabelSet labels = snapshot_->labels;
  if (labels.empty()) throw ApiError(409, "nothing_to_undo", "no labels to undo");
  labels.pop_back();
  rebuild(labels);
  persist_labels();
  touch();
  return labels.size();
}

std::shared_ptr<const Snapshot> Session::snapshot() const {
  std::lock_guard lock(mutex_);
  return snapshot_;
}

io::Bytes Session::segmentation_png(bool with_overlay) const {
  const auto snap = snapshot();
  if (!snap->segmentation) throw ApiError(409, "no_labels", "no labels submitted yet");
  if (!with_overlay) return io::encode_label_png(*snap->segmentation);
  return io::encode_rgb_png(io::overlay(image_, *snap->segmentation, schema_, options_.overlay_opacity));
}

std::string Session::created() const {
  std::lock_guard lock(mutex_);
  return created_;
}

std::string Session::updated() const {
  std::lock_guard lock(mutex_);
  return updated_;
}

std::string Session::metadata_json() const {
  const auto snap = snapshot();
  json meta = {{"session", id_},
               {"engine_version", kEngineVersion},
               {"strategy", to_string(options_.sampler.strategy)},
               {"seed", options_.sampler.seed},
               {"lambda", options_.sampler.lambda},
               {"random_ratio", options_.sampler.random_ratio},
               {"budget", options_.sampler.budget},
               {"active_budget", options_.sampler.active_budget()},
               {"labels", snap->labels.size()},
               {"provider", to_string(provider_mode_)},
               {"mode", to_string(options_.mode)},
               {"rng", std::string(Rng::kAlgorithm)},
               {"superpixels",
                {{"K", options_.superpixels.superpixels},
                 {"compactness", options_.superpixels.compactness},
                 {"iterations", options_.superpixels.iterations}}},
               {"width", dims().width},
               {"height", dims().height}};
  return meta.dump(2) + "\n";
}

io::Bytes Session::export_archive() const {
  const auto snap = snapshot();
  io::TarWriter tar;
  tar.add("points.csv", io::format_points_csv(snap->labels));
  if (snap->segmentation) {
    tar.add("segmentation.png", io::encode_label_png(*snap->segmentation));
    tar.add("overlay.png", io::encode_rgb_png(io::overlay(image_, *snap->segmentation, schema_,
                                                          options_.overlay_opacity)));
  }
  tar.add("schema.json", io::format_schema_json(schema_));
  tar.add("proposals.json", format_manifest(*proposals_));
  tar.add("metadata.json", metadata_json());
  return std::move(tar).finish();
}

std::map<std::string, io::Bytes> Session::persisted_state() const {
  std::lock_guard lock(mutex_);
  std::map<std::string, io::Bytes> out;
  for (const char* name : {"image.png", "schema.json", "proposals.json", "config.json", "labels.csv"}) {
    out[name] = io::read_file(dir_ / name);
  }
  return out;
}

// ----------------------------------------------------------------------------
// Config

ServiceConfig load_service_config(const std::optional<fs::path>& path,
                                  const std::function<const char*(const char*)>& getenv) {
  ServiceConfig c;
  if (path) {
    const io::Bytes bytes = io::read_file(*path);
    json j;
    try {
      j = json::parse(bytes.begin(), bytes.end());
      for (const auto& [key, value] : j.items()) {
        if (key == "host") {
          c.host = value.get<std::string>();
        } else if (key == "port") {
          c.port = value.get<int>();
        } else if (key == "data_dir") {
          const fs::path d = value.get<std::string>();
          c.data_dir = d.is_absolute() ? d : path->parent_path() / d;
        } else if (key == "max_upload_bytes") {
          c.max_upload_bytes = value.get<std::size_t>();
        } else if (key == "overlay_opacity") {
          c.overlay_opacity = value.get<double>();
        } else if (key == "default_mode") {
          const auto mode = parse_mode(value.get<std::string>());
          if (!mode) throw Error(ErrorKind::InvalidArgument, "default_mode is strict|free");
          c.default_mode = *mode;
        } else {
          throw Error(ErrorKind::InvalidArgument, "unknown service config key " + key);
        }
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::InvalidArgument, "service config " + path->string() + ": " + e.what());
    }
  }
  auto env = [&](const char* name) -> const char* { return getenv ? getenv(name) : std::getenv(name); };
  try {
    if (const char* v = env("SPARSESEG_HOST")) c.host = v;
    if (const char* v = env("SPARSESEG_PORT")) c.port = std::stoi(v);
    if (const char* v = env("SPARSESEG_DATA_DIR")) c.data_dir = v;
    if (const char* v = env("SPARSESEG_MAX_UPLOAD")) c.max_upload_bytes = std::stoull(v);
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::InvalidArgument, "malformed SPARSESEG_* environment value");
  }
  if (c.port < 0 || c.port > 65535) throw Error(ErrorKind::InvalidArgument, "port outside [0, 65535]");
  return c;
}

// ----------------------------------------------------------------------------
// Store

SessionStore::SessionStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {
  fs::create_directories(data_dir_);
  for (const auto& entry : fs::directory_iterator(data_dir_)) {
    if (!entry.is_directory() || !fs::exists(entry.path() / "config.json")) continue;
    try {
      auto s = Session::load(entry.path());
      sessions_[s->id()] = std::move(s);
    } catch (const std::exception& e) {
      std::cerr << "skipping session " << entry.path() << ": " << e.what() << "\n";
    }
  }
}

std::shared_ptr<Session> SessionStore::create(const io::Bytes& image_png, const LabelSchema& schema,
                                              const SessionOptions& options,
                                              std::optional<ProposalSet> proposals) {
  std::string id;
  {
    std::lock_guard lock(mutex_);
    do {
      id = new_session_id();
    } while (sessions_.count(id) || fs::exists(data_dir_ / id));
  }
  auto s = Session::create(data_dir_ / id, id, image_png, schema, options, std::move(proposals));
  std::lock_guard lock(mutex_);
  sessions_[id] = s;
  return s;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ApiError(404, "not_found", "no session " + id);
  return it->second;
}

std::vector<std::shared_ptr<Session>> SessionStore::list() const {
  std::lock_guard lock(mutex_);
  std::vector<std::shared_ptr<Session>> out;
  for (const auto& [id, s] : sessions_) out.push_back(s);
  return out;
}

void SessionStore::remove(const std::string& id) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ApiError(404, "not_found", "no session " + id);
    s = it->second;
    sessions_.erase(it);
  }
  std::error_code ec;
  fs::remove_all(s->dir(), ec);
}

// ----------------------------------------------------------------------------
// HTTP

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, {{"code", code}, {"message", message}});
}

std::string default_code(int status) {
  switch (status) {
    case 400: return "invalid_request";
    case 404: return "not_found";
    case 405: return "method_not_allowed";
    case 409: return "conflict";
    case 413: return "payload_too_large";
    case 422: return "invalid_label";
    default: return status >= 500 ? "internal" : "error";
  }
}

template <typename F>
auto guarded(F fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ApiError& e) {
      send_error(res, e.status(), e.code(), e.what());
    } catch (const Error& e) {
      const bool io = e.kind() == ErrorKind::IoError;
      send_error(res, io ? 500 : 400, io ? "internal" : "invalid_request", e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "invalid_request", std::string("malformed JSON: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

std::string form_value(const httplib::Request& req, const std::string& name) {
  if (req.has_file(name)) return req.get_file_value(name).content;
  if (req.has_param(name)) return req.get_param_value(name);
  return {};
}

bool has_form_value(const httplib::Request& req, const std::string& name) {
  return req.has_file(name) || req.has_param(name);
}

SessionOptions parse_create_options(const httplib::Request& req, const ServiceConfig& config) {
  SessionOptions o;
  o.mode = config.default_mode;
  o.overlay_opacity = config.overlay_opacity;
  if (has_form_value(req, "config")) {
    const json j = json::parse(form_value(req, "config"));
    if (!j.is_object()) bad_request("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "strategy") {
        const auto s = parse_strategy(value.get<std::string>());
        if (!s) bad_request("unknown strategy " + value.get<std::string>());
        o.sampler.strategy = *s;
      } else if (key == "lambda") {
        o.sampler.lambda = value.get<double>();
      } else if (key == "random_ratio") {
        o.sampler.random_ratio = value.get<double>();
      } else if (key == "seed") {
        o.sampler.seed = value.get<std::uint64_t>();
      } else if (key == "budget") {
        o.sampler.budget = value.get<int>();
      } else if (key == "mode") {
        const auto m = parse_mode(value.get<std::string>());
        if (!m) bad_request("mode is strict|free");
        o.mode = *m;
      } else if (key == "overlay_opacity") {
        o.overlay_opacity = value.get<double>();
      } else if (key == "superpixels") {
        o.superpixels.superpixels = value.get<int>();
      } else if (key == "compactness") {
        o.superpixels.compactness = value.get<double>();
      } else {
        bad_request("unknown config key " + key);
      }
    }
  }
  if (has_form_value(req, "budget")) {
    try {
      std::size_t used = 0;
      const std::string text = form_value(req, "budget");
      o.sampler.budget = std::stoi(text, &used);
      if (used != text.size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      bad_request("budget must be an integer");
    }
  }
  return o;
}

json pending_json(const PendingPoint& p) {
  return {{"x", p.point.x},
          {"y", p.point.y},
          {"phase", to_string(p.phase)},
          {"progress", std::to_string(p.progress.done) + "-of-" + std::to_string(p.progress.total)},
          {"done", p.progress.done},
          {"total", p.progress.total}};
}

}  // namespace

struct Server::Impl {
  httplib::Server http;
};

Server::Server(ServiceConfig config)
    : config_(std::move(config)),
      store_(std::make_unique<SessionStore>(config_.data_dir)),
      impl_(std::make_unique<Impl>()) {
  auto& http = impl_->http;
  http.set_payload_max_length(config_.max_upload_bytes);
  http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    send_error(res, res.status, default_code(res.status), httplib::status_message(res.status));
    return httplib::Server::HandlerResponse::Handled;
  });

  http.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
             send_json(res, 200, {{"status", "ok"}, {"engine_version", kEngineVersion}});
           }));

  http.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
              if (!req.is_multipart_form_data()) bad_request("expected multipart/form-data");
              if (!req.has_file("image")) bad_request("missing image upload");
              if (!has_form_value(req, "schema")) bad_request("missing schema");
              if (!has_form_value(req, "proposals")) {
                bad_request("missing proposals (a manifest upload or \"fallback\")");
              }
              const std::string image = req.get_file_value("image").content;
              const LabelSchema schema = io::parse_schema_json(form_value(req, "schema"));
              const SessionOptions options = parse_create_options(req, config_);
              std::optional<ProposalSet> proposals;
              const std::string manifest = form_value(req, "proposals");
              if (manifest != "fallback") proposals = parse_manifest(manifest);
              auto s = store_->create(io::Bytes(image.begin(), image.end()), schema, options, std::move(proposals));
              send_json(res, 201,
                        {{"id", s->id()},
                         {"width", s->dims().width},
                         {"height", s->dims().height},
                         {"budget", options.sampler.budget},
                         {"active_budget", options.sampler.active_budget()},
                         {"provider", to_string(s->provider_mode())},
                         {"mode", to_string(options.mode)}});
            }));

  http.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
             json list = json::array();
             for (const auto& s : store_->list()) {
               list.push_back({{"id", s->id()},
                               {"width", s->dims().width},
                               {"height", s->dims().height},
                               {"labels", s->snapshot()->labels.size()},
                               {"budget", s->options().sampler.budget},
                               {"created", s->created()},
                               {"updated", s->updated()}});
             }
             send_json(res, 200, {{"sessions", list}});
           }));

  http.Delete(R"(/sessions/([0-9a-f]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                store_->remove(req.matches[1]);
                res.status = 204;
              }));

  http.Get(R"(/sessions/([0-9a-f]+)/next-point)",
           guarded([this](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 200, pending_json(store_->get(req.matches[1])->next_point()));
           }));

  http.Post(R"(/sessions/([0-9a-f]+)/labels)", guarded([this](const httplib::Request& req, httplib::Response& res) {
              auto s = store_->get(req.matches[1]);
              const json body = json::parse(req.body);
              if (!body.is_object() || !body.contains("x") || !body.contains("y") || !body.contains("label")) {
                bad_request("body needs x, y and label");
              }
              if (!body["x"].is_number_integer() || !body["y"].is_number_integer()) {
                bad_request("x and y must be integers");
              }
              if (!body["label"].is_number_integer()) throw ApiError(422, "invalid_label", "label must be an integer");
              const PixelCoord p{body["x"].get<int>(), body["y"].get<int>()};
              const bool next = s->submit(p, body["label"].get<int>());
              const auto count = s->snapshot()->labels.size();
              send_json(res, 200,
                        {{"accepted", true},
                         {"next_available", next},
                         {"progress", std::to_string(count) + "-of-" + std::to_string(s->options().sampler.budget)}});
            }));

  http.Post(R"(/sessions/([0-9a-f]+)/undo)", guarded([this](const httplib::Request& req, httplib::Response& res) {
              send_json(res, 200, {{"remaining", store_->get(req.matches[1])->undo()}});
            }));

  http.Get(R"(/sessions/([0-9a-f]+)/segmentation)",
           guarded([this](const httplib::Request& req, httplib::Response& res) {
             auto s = store_->get(req.matches[1]);
             const std::string format = req.has_param("format") ? req.get_param_value("format") : "indexed";
             if (format != "indexed" && format != "overlay") bad_request("format is indexed|overlay");
             const io::Bytes png = s->segmentation_png(format == "overlay");
             res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
           }));

  http.Get(R"(/sessions/([0-9a-f]+)/export)", guarded([this](const httplib::Request& req, httplib::Response& res) {
             auto s = store_->get(req.matches[1]);
             const io::Bytes tar = s->export_archive();
             res.set_header("Content-Disposition", "attachment; filename=\"" + s->id() + ".tar\"");
             res.set_content(reinterpret_cast<const char*>(tar.data()), tar.size(), "application/x-tar");
           }));
}

Server::~Server() = default;

int Server::bind() {
  auto& http = impl_->http;
  const int port = config_.port == 0 ? http.bind_to_any_port(config_.host) : (http.bind_to_port(config_.host, config_.port)
                                                                                   ? config_.port
                                                                                   : -1);
  if (port < 0) throw Error(ErrorKind::IoError, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  return port;
}

void Server::serve() { impl_->http.listen_after_bind(); }

void Server::stop() { impl_->http.stop(); }

}  // namespace sparseseg::service
