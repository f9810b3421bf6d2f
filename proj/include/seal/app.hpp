#pragma once

// Inference session, request handling and the HTTP service.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "seal/events.hpp"
#include "seal/guidance.hpp"
#include "seal/model.hpp"

namespace seal::app {

struct InferRequest {
    std::string frame_id;
    std::vector<model::Prompt> prompts;
    std::vector<std::string> queries;
    std::string granularity = "auto";  // auto | coarse | mid | fine
    bool canonical = false;
};

// Prompts: {"type": "point", "points": [[x, y], ...]} or {"type": "box", "box": [x0, y0, x1, y1]}.
InferRequest infer_request_from_json(const nlohmann::json& j);
nlohmann::json infer_request_to_json(const InferRequest& r);

struct InferMask {
    BinaryMask mask;
    model::Granularity granularity = model::Granularity::box;
    std::string label;
    double score = 0.0;
};

struct InferResponse {
    std::string frame_id;
    int height = 0, width = 0;
    std::vector<std::vector<InferMask>> prompts;  // per request prompt

    nlohmann::json to_json() const;
};

// Directory of pre-voxelized VOX1 grids, one file per frame: <frame_id>.vox.
class FrameStore {
public:
    FrameStore() = default;
    explicit FrameStore(const std::filesystem::path& dir);

    std::vector<std::string> ids() const;  // sorted
    bool contains(const std::string& id) const { return frames_.count(id) > 0; }
    const events::VoxelGrid& get(const std::string& id) const;  // NotFoundError
    void add(const std::string& id, events::VoxelGrid grid);

private:
    std::map<std::string, events::VoxelGrid> frames_;
};

// Immutable after construction; shared by concurrent requests.
class Session {
public:
    Session(model::Model m, std::vector<std::string> vocabulary, FrameStore frames);
    static std::shared_ptr<const Session> open(const std::filesystem::path& ckpt, const std::filesystem::path& frames);

    const model::Model& model() const { return model_; }
    const FrameStore& frames() const { return frames_; }
    std::vector<double> encode_text(const std::string& text) const { return encoder_.encode(text); }

private:
    model::Model model_;
    guidance::SyntheticTextEncoder encoder_;
    FrameStore frames_;
};

InferResponse handle_infer(const InferRequest& req, const Session& session);

// Grayscale 24-bit BMP of the summed voxel bins, base64-encoded.
std::string voxel_preview_base64(const events::VoxelGrid& grid);

// HTTP front end. Requests run against a snapshot taken at request start;
// swap() replaces the snapshot for subsequent requests.
class Server {
public:
    explicit Server(std::shared_ptr<const Session> session);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Port 0 picks a free port; returns the bound port.
    int bind(const std::string& host, int port);
    void listen();  // blocks until stop()
    void stop();
    void swap(std::shared_ptr<const Session> session);

private:
    std::shared_ptr<const Session> snapshot() const;

    struct Impl;
    std::unique_ptr<Impl> impl_;
    mutable std::mutex mu_;
    std::shared_ptr<const Session> session_;
};

}  // namespace seal::app
