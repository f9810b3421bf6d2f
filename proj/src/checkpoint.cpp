#include <cmath>
#include <fstream>

#include "seal/binio.hpp"
#include "seal/error.hpp"
#include "seal/model.hpp"

namespace seal::model {

namespace {
constexpr char kCkptMagic[4] = {'S', 'C', 'K', '1'};
}

void save_checkpoint(const Model& m, const CheckpointMeta& meta, const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write checkpoint " + path.string());
    nlohmann::json doc = {{"config", config_to_json(m.config())},
                          {"stage", meta.stage},
                          {"iteration", meta.iteration},
                          {"seed", meta.seed},
                          {"classes", meta.classes}};
    const std::string text = doc.dump();
    binio::Writer w(out);
    w.magic(kCkptMagic);
    w.u32(static_cast<uint32_t>(text.size()));
    w.bytes(text.data(), text.size());
    const auto& all = m.params().all();
    w.u32(static_cast<uint32_t>(all.size()));
    for (const auto& [name, t] : all) {
        w.u16(static_cast<uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.u32(static_cast<uint32_t>(t.rows()));
        w.u32(static_cast<uint32_t>(t.cols()));
        for (double v : t.value()) w.f32(static_cast<float>(v));
    }
    if (!out) throw FormatError("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("checkpoint not found: " + path.string());
    binio::Reader r(in, path.string());
    r.expect_magic(kCkptMagic);
    std::string text(r.u32(), '\0');
    r.read(text.data(), text.size());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad config document: " + e.what());
    }
    const CheckpointMeta m{doc.value("stage", 0), doc.value("iteration", 0L), doc.value("seed", uint64_t{0}),
                           doc.value("classes", std::vector<std::string>{})};
    Model model(config_from_json(doc.at("config")), m.seed);
    const uint32_t count = r.u32();
    if (count != model.params().all().size()) {
        throw FormatError(path.string() + ": holds " + std::to_string(count) + " arrays, config expects " +
                          std::to_string(model.params().all().size()));
    }
    for (uint32_t i = 0; i < count; ++i) {
        std::string name(r.u16(), '\0');
        r.read(name.data(), name.size());
        const uint32_t rows = r.u32(), cols = r.u32();
        if (!model.params().contains(name)) throw FormatError(path.string() + ": unexpected array " + name);
        auto t = model.params().get(name);
        if (static_cast<int>(rows) != t.rows() || static_cast<int>(cols) != t.cols()) {
            throw FormatError(path.string() + ": array " + name + " has the wrong shape");
        }
        std::vector<double> v(std::size_t(rows) * cols);
        for (auto& x : v) {
            x = r.f32();
            if (!std::isfinite(x)) throw FormatError(path.string() + ": non-finite value in " + name);
        }
        model.params().set(name, v);
    }
    if (meta) *meta = m;
    return model;
}

std::map<std::string, std::size_t> count_params(const nn::ParamStore& store)
{
    std::map<std::string, std::size_t> groups;
    for (const auto& [name, t] : store.all()) groups[name.substr(0, name.find('.'))] += t.size();
    return groups;
}

}  // namespace seal::model
