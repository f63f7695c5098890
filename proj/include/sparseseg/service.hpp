#pragma once

// Interactive annotation sessions and their HTTP front end.
//
// Session directory layout (the label log and config are authoritative; the
// segmentation is rebuilt from them):
//   image.png  schema.json  proposals.json  config.json  labels.csv  times.json

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sparseseg/io.hpp"
#include "sparseseg/proposals.hpp"
#include "sparseseg/sampler.hpp"
#include "sparseseg/superpixels.hpp"

namespace sparseseg::service {

inline constexpr const char* kEngineVersion = "0.1.0";

// Carries the HTTP status and a stable machine-readable code.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

enum class SubmitMode { Strict, Free };
std::string_view to_string(SubmitMode mode);

struct SessionOptions {
  SamplerConfig sampler;
  SubmitMode mode = SubmitMode::Strict;
  double overlay_opacity = 0.5;
  SlicConfig superpixels;
  FallbackConfig fallback;
};

struct Progress {
  int done = 0;
  int total = 0;
};

struct PendingPoint {
  PixelCoord point;
  Phase phase;
  Progress progress;
};

// Current labels and the segmentation they produce. Immutable once published.
struct Snapshot {
  PointLabelSet labels;
  std::shared_ptr<const LabelMap> segmentation;  // null before the first label
};

class Session {
 public:
  // Validates inputs, persists the session directory and precomputes O.
  // `proposals` nullopt means fallback generation from the image.
  static std::shared_ptr<Session> create(const std::filesystem::path& dir, std::string id,
                                         const io::Bytes& image_png, const LabelSchema& schema,
                                         const SessionOptions& options,
                                         std::optional<ProposalSet> proposals);
  // Replays the persisted label log.
  static std::shared_ptr<Session> load(const std::filesystem::path& dir);

  const std::string& id() const { return id_; }
  ImageDims dims() const { return image_.dims(); }
  const LabelSchema& schema() const { return schema_; }
  const SessionOptions& options() const { return options_; }
  ProviderMode provider_mode() const { return provider_mode_; }
  const std::filesystem::path& dir() const { return dir_; }

  PendingPoint next_point();
  // Returns whether another suggestion is available.
  bool submit(PixelCoord p, int label);
  // Returns the number of labels left.
  std::size_t undo();

  std::shared_ptr<const Snapshot> snapshot() const;
  io::Bytes segmentation_png(bool overlay) const;
  io::Bytes export_archive() const;
  std::string metadata_json() const;
  std::string created() const;
  std::string updated() const;

  // Authoritative persisted files (everything except timestamps), for
  // comparing states.
  std::map<std::string, io::Bytes> persisted_state() const;

 private:
  Session() = default;
  void rebuild(const PointLabelSet& labels);
  void publish(const PointLabelSet& labels);
  void persist_labels() const;
  void touch();
  Progress progress() const;

  mutable std::mutex mutex_;
  std::filesystem::path dir_;
  std::string id_;
  RgbImage image_;
  LabelSchema schema_;
  SessionOptions options_;
  ProviderMode provider_mode_ = ProviderMode::File;
  std::shared_ptr<const ProposalSet> proposals_;
  std::unique_ptr<FileProposalProvider> provider_;
  std::unique_ptr<SuperpixelMap> superpixels_;
  std::unique_ptr<PointSuggester> suggester_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::string created_, updated_;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path data_dir = "sessions";
  std::size_t max_upload_bytes = 64u << 20;
  double overlay_opacity = 0.5;
  SubmitMode default_mode = SubmitMode::Strict;
};

// JSON config file (optional) with SPARSESEG_HOST, SPARSESEG_PORT,
// SPARSESEG_DATA_DIR and SPARSESEG_MAX_UPLOAD overriding it.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& path,
                                  const std::function<const char*(const char*)>& getenv = nullptr);

class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path data_dir);

  std::shared_ptr<Session> create(const io::Bytes& image_png, const LabelSchema& schema,
                                  const SessionOptions& options, std::optional<ProposalSet> proposals);
  // Throws ApiError 404.
  std::shared_ptr<Session> get(const std::string& id) const;
  std::vector<std::shared_ptr<Session>> list() const;
  void remove(const std::string& id);

 private:
  std::filesystem::path data_dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

class Server {
 public:
  explicit Server(ServiceConfig config);
  ~Server();

  // Binds the socket; returns the bound port or throws.
  int bind();
  // Blocks until stop().
  void serve();
  void stop();
  SessionStore& store() { return *store_; }

 private:
  struct Impl;
  ServiceConfig config_;
  std::unique_ptr<SessionStore> store_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sparseseg::service
