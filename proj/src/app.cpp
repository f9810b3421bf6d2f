#include "seal/app.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "seal/benchmark.hpp"
#include "seal/error.hpp"

namespace seal::app {

using ag::Tensor;
using nlohmann::json;

namespace {

const std::vector<std::string> kGranularities{"auto", "coarse", "mid", "fine"};

model::Prompt prompt_from_json(const json& j, std::size_t index)
{
    const std::string where = "prompt " + std::to_string(index) + ": ";
    if (!j.is_object()) throw ValidationError(where + "must be an object");
    const std::string type = j.value("type", "");
    model::Prompt p;
    if (type == "point") {
        p.kind = model::Prompt::Kind::point;
        if (j.contains("points")) {
            for (const auto& pt : j.at("points")) p.points.emplace_back(pt.at(0).get<int>(), pt.at(1).get<int>());
        } else if (j.contains("point")) {
            p.points.emplace_back(j["point"].at(0).get<int>(), j["point"].at(1).get<int>());
        }
        if (p.points.empty()) throw ValidationError(where + "point prompt without points");
    } else if (type == "box") {
        p.kind = model::Prompt::Kind::box;
        const auto& b = j.at("box");
        if (!b.is_array() || b.size() != 4) throw ValidationError(where + "box must be [x0, y0, x1, y1]");
        p.box = {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
    } else {
        throw ValidationError(where + "type must be 'point' or 'box'");
    }
    return p;
}

std::vector<std::pair<std::string, std::vector<double>>> encode_all(const Session& s,
                                                                    const std::vector<std::string>& texts)
{
    std::vector<std::pair<std::string, std::vector<double>>> out;
    for (const auto& t : texts) out.emplace_back(t, s.encode_text(t));
    return out;
}

}  // namespace

InferRequest infer_request_from_json(const json& j)
{
    if (!j.is_object()) throw ValidationError("request must be a JSON object");
    InferRequest r;
    try {
        r.frame_id = j.at("frame_id").get<std::string>();
        const auto& prompts = j.at("prompts");
        if (!prompts.is_array()) throw ValidationError("prompts must be a list");
        for (std::size_t i = 0; i < prompts.size(); ++i) r.prompts.push_back(prompt_from_json(prompts[i], i));
        r.queries = j.at("queries").get<std::vector<std::string>>();
        r.granularity = j.value("granularity", "auto");
        r.canonical = j.value("canonical", false);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed request: ") + e.what());
    }
    if (r.prompts.empty()) throw ValidationError("request needs at least one prompt");
    if (r.queries.empty()) throw ValidationError("request needs at least one query");
    for (const auto& q : r.queries) {
        if (q.empty()) throw ValidationError("empty query string");
    }
    if (std::find(kGranularities.begin(), kGranularities.end(), r.granularity) == kGranularities.end()) {
        throw ValidationError("granularity must be auto, coarse, mid or fine");
    }
    return r;
}

json infer_request_to_json(const InferRequest& r)
{
    json prompts = json::array();
    for (const auto& p : r.prompts) {
        if (p.kind == model::Prompt::Kind::box) {
            prompts.push_back({{"type", "box"}, {"box", {p.box.x_min, p.box.y_min, p.box.x_max, p.box.y_max}}});
        } else {
            json pts = json::array();
            for (const auto& [x, y] : p.points) pts.push_back({x, y});
            prompts.push_back({{"type", "point"}, {"points", pts}});
        }
    }
    return {{"frame_id", r.frame_id},
            {"prompts", prompts},
            {"queries", r.queries},
            {"granularity", r.granularity},
            {"canonical", r.canonical}};
}

json InferResponse::to_json() const
{
    json results = json::array();
    for (const auto& masks : prompts) {
        json ms = json::array();
        for (const auto& m : masks) {
            ms.push_back({{"mask", mask_to_json(m.mask)},
                          {"granularity", model::granularity_name(m.granularity)},
                          {"label", m.label},
                          {"score", m.score}});
        }
        results.push_back({{"masks", ms}});
    }
    return {{"frame_id", frame_id}, {"height", height}, {"width", width}, {"results", results}};
}

// ---------------------------------------------------------------------------

FrameStore::FrameStore(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir)) throw NotFoundError("frame store " + dir.string() + " is not a directory");
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".vox") {
            frames_.emplace(e.path().stem().string(), events::load_voxel(e.path()));
        }
    }
}

std::vector<std::string> FrameStore::ids() const
{
    std::vector<std::string> out;
    for (const auto& [id, g] : frames_) out.push_back(id);
    return out;
}

const events::VoxelGrid& FrameStore::get(const std::string& id) const
{
    const auto it = frames_.find(id);
    if (it == frames_.end()) throw NotFoundError("unknown frame '" + id + "'");
    return it->second;
}

void FrameStore::add(const std::string& id, events::VoxelGrid grid) { frames_[id] = std::move(grid); }

Session::Session(model::Model m, std::vector<std::string> vocabulary, FrameStore frames)
    : model_(std::move(m)), encoder_(model_.config().d, std::move(vocabulary)), frames_(std::move(frames))
{
    const auto& cfg = model_.config();
    for (const auto& id : frames_.ids()) {
        const auto& c = frames_.get(id).config;
        if (c.bins != cfg.in_channels || c.height != cfg.height || c.width != cfg.width) {
            throw ConfigError("frame '" + id + "' geometry " + std::to_string(c.bins) + "x" + std::to_string(c.height) +
                              "x" + std::to_string(c.width) + " does not match the model input");
        }
    }
}

std::shared_ptr<const Session> Session::open(const std::filesystem::path& ckpt, const std::filesystem::path& frames)
{
    model::CheckpointMeta meta;
    auto m = model::load_checkpoint(ckpt, &meta);
    return std::make_shared<const Session>(std::move(m), meta.classes, FrameStore(frames));
}

InferResponse handle_infer(const InferRequest& req, const Session& session)
{
    ag::NoGradGuard ng;
    const auto& net = session.model();
    const auto& cfg = net.config();
    const auto& grid = session.frames().get(req.frame_id);
    if (req.prompts.empty() || req.queries.empty()) throw ValidationError("request needs prompts and queries");
    for (const auto& p : req.prompts) model::validate_prompt(p, cfg.height, cfg.width);

    const auto queries = encode_all(session, req.queries);
    std::vector<std::pair<std::string, std::vector<double>>> canonical;
    if (req.canonical) {
        canonical = encode_all(session, std::vector<std::string>(model::kCanonicalPhrases.begin(),
                                                                  model::kCanonicalPhrases.end()));
    }
    std::vector<double> text;
    for (const auto& [q, v] : queries) text.insert(text.end(), v.begin(), v.end());
    const Tensor text_tokens = Tensor::constant(static_cast<int>(queries.size()), cfg.d, std::move(text));

    const Tensor feats = net.encode_backbone(events::normalize_voxel(grid));
    const Tensor fused = net.enhance(feats, text_tokens);

    InferResponse resp;
    resp.frame_id = req.frame_id;
    resp.height = cfg.height;
    resp.width = cfg.width;
    for (const auto& p : req.prompts) {
        auto masks = net.decode_masks(feats, {p});
        if (p.kind == model::Prompt::Kind::point && req.granularity != "auto") {
            std::erase_if(masks, [&](const model::MaskPrediction& m) {
                return model::granularity_name(m.granularity) != req.granularity;
            });
        }
        std::vector<InferMask> out;
        if (!masks.empty()) {
            std::vector<double> g;
            std::vector<BinaryMask> bm;
            for (const auto& m : masks) {
                g.insert(g.end(), m.token.begin(), m.token.end());
                bm.push_back(m.mask);
            }
            const auto mf = net.mask_features(fused, Tensor::constant(static_cast<int>(masks.size()), cfg.d, g), bm);
            for (std::size_t k = 0; k < masks.size(); ++k) {
                const auto ranked = model::classify(mf.M_hat.row(static_cast<int>(k)), queries, canonical);
                out.push_back({masks[k].mask, masks[k].granularity, ranked.front().label, ranked.front().score});
            }
        }
        resp.prompts.push_back(std::move(out));
    }
    return resp;
}

std::string voxel_preview_base64(const events::VoxelGrid& grid)
{
    const int H = grid.config.height, W = grid.config.width, B = grid.config.bins;
    std::vector<double> sum(std::size_t(H) * W, 0.0);
    double peak = 0.0;
    for (int b = 0; b < B; ++b) {
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) sum[std::size_t(y) * W + x] += grid.at(b, y, x);
        }
    }
    for (double v : sum) peak = std::max(peak, std::abs(v));
    const int row_bytes = (3 * W + 3) & ~3;
    const uint32_t data_size = uint32_t(row_bytes) * H, file_size = 54 + data_size;
    std::string bmp(file_size, '\0');
    auto put = [&](std::size_t off, uint32_t v, int n) {
        for (int i = 0; i < n; ++i) bmp[off + i] = static_cast<char>((v >> (8 * i)) & 0xff);
    };
    bmp[0] = 'B';
    bmp[1] = 'M';
    put(2, file_size, 4);
    put(10, 54, 4);
    put(14, 40, 4);
    put(18, uint32_t(W), 4);
    put(22, uint32_t(H), 4);
    put(26, 1, 2);
    put(28, 24, 2);
    put(34, data_size, 4);
    for (int y = 0; y < H; ++y) {
        const std::size_t row = 54 + std::size_t(H - 1 - y) * row_bytes;  // bottom-up
        for (int x = 0; x < W; ++x) {
            const double v = peak > 0.0 ? sum[std::size_t(y) * W + x] / peak : 0.0;
            const auto g = static_cast<char>(std::lround(127.5 + 127.5 * v));
            bmp[row + 3 * x] = bmp[row + 3 * x + 1] = bmp[row + 3 * x + 2] = g;
        }
    }
    return httplib::detail::base64_encode(bmp);
}

// ---------------------------------------------------------------------------

struct Server::Impl {
    httplib::Server http;
};

namespace {

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message)
{
    res.status = status;
    res.set_content(json{{"code", code}, {"message", message}}.dump(), "application/json");
}

}  // namespace

Server::Server(std::shared_ptr<const Session> session) : impl_(std::make_unique<Impl>()), session_(std::move(session))
{
    auto& http = impl_->http;
    http.Get("/api/frames", [this](const httplib::Request&, httplib::Response& res) {
        const auto s = snapshot();
        json list = json::array();
        for (const auto& id : s->frames().ids()) {
            const auto& g = s->frames().get(id);
            list.push_back({{"frame_id", id},
                            {"width", g.config.width},
                            {"height", g.config.height},
                            {"preview", "data:image/bmp;base64," + voxel_preview_base64(g)}});
        }
        res.set_content(list.dump(), "application/json");
    });
    http.Post("/api/infer", [this](const httplib::Request& req, httplib::Response& res) {
        const auto s = snapshot();
        try {
            const auto body = json::parse(req.body);
            const auto r = infer_request_from_json(body);
            res.set_content(handle_infer(r, *s).to_json().dump(), "application/json");
        } catch (const json::parse_error& e) {
            send_error(res, 400, "bad_request", std::string("invalid JSON: ") + e.what());
        } catch (const NotFoundError& e) {
            send_error(res, 404, "not_found", e.what());
        } catch (const ValidationError& e) {
            send_error(res, 400, "invalid_request", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    });
    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            res.set_content(json{{"code", res.status == 404 ? "not_found" : "error"}, {"message", "no such endpoint"}}.dump(),
                            "application/json");
        }
    });
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port)
{
    if (port == 0) {
        const int p = impl_->http.bind_to_any_port(host);
        if (p < 0) throw Error("cannot bind " + host);
        return p;
    }
    if (!impl_->http.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop()
{
    if (impl_) impl_->http.stop();
}

void Server::swap(std::shared_ptr<const Session> session)
{
    std::lock_guard<std::mutex> lock(mu_);
    session_ = std::move(session);
}

std::shared_ptr<const Session> Server::snapshot() const
{
    std::lock_guard<std::mutex> lock(mu_);
    return session_;
}

}  // namespace seal::app
