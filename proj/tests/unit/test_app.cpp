#include <doctest.h>

#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "../test_util.hpp"
#include "seal/app.hpp"
#include "seal/cli.hpp"
#include "seal/error.hpp"

using namespace seal;
using namespace seal::app;
using nlohmann::json;

namespace {

events::VoxelGrid voxel(uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    events::VoxelGrid g;
    g.config = {3, 25'000, 64, 64};
    g.data.resize(3 * 64 * 64);
    for (auto& v : g.data) v = float(u(rng));
    return events::normalize_voxel(g);
}

std::shared_ptr<const Session> make_session(uint64_t seed = 3)
{
    FrameStore fs;
    fs.add("f0", voxel(1));
    fs.add("f1", voxel(2));
    return std::make_shared<const Session>(model::Model(model::ModelConfig::desk(), seed),
                                           std::vector<std::string>{"car", "person", "tree"}, std::move(fs));
}

json point_request(const std::string& frame = "f0")
{
    return {{"frame_id", frame},
            {"prompts", {{{"type", "point"}, {"points", {{10, 20}}}}}},
            {"queries", {"car", "person"}}};
}

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr)
{
    args.insert(args.begin(), "seal");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int rc = cli::run(int(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return rc;
}

}  // namespace

TEST_CASE("infer request parsing")
{
    const auto r = infer_request_from_json(
        {{"frame_id", "f0"},
         {"prompts", {{{"type", "point"}, {"points", {{1, 2}, {3, 4}}}}, {{"type", "box"}, {"box", {1, 2, 5, 9}}}}},
         {"queries", {"car"}},
         {"granularity", "fine"},
         {"canonical", true}});
    REQUIRE(r.prompts.size() == 2);
    CHECK(r.prompts[0].points.size() == 2);
    CHECK(r.prompts[1].box == Box{1, 2, 5, 9});
    CHECK(r.granularity == "fine");
    CHECK(r.canonical);
    const auto back = infer_request_from_json(infer_request_to_json(r));
    CHECK(back.prompts[1].box == r.prompts[1].box);
    CHECK(back.queries == r.queries);

    auto bad = point_request();
    bad["prompts"] = json::array();
    CHECK_THROWS_AS(infer_request_from_json(bad), ValidationError);
    bad = point_request();
    bad["queries"] = json::array();
    CHECK_THROWS_AS(infer_request_from_json(bad), ValidationError);
    bad = point_request();
    bad["queries"] = {""};
    CHECK_THROWS_AS(infer_request_from_json(bad), ValidationError);
    bad = point_request();
    bad["granularity"] = "huge";
    CHECK_THROWS_AS(infer_request_from_json(bad), ValidationError);
    bad = point_request();
    bad["prompts"][0]["type"] = "scribble";
    CHECK_THROWS_AS(infer_request_from_json(bad), ValidationError);
    bad = point_request();
    bad["prompts"][0]["box"] = {1, 2};
    bad["prompts"][0]["type"] = "box";
    CHECK_THROWS_AS(infer_request_from_json(bad), ValidationError);
}

TEST_CASE("handle_infer")
{
    const auto s = make_session();
    const auto r = handle_infer(infer_request_from_json(point_request()), *s);
    CHECK(r.frame_id == "f0");
    REQUIRE(r.prompts.size() == 1);
    REQUIRE(r.prompts[0].size() == 3);
    for (const auto& m : r.prompts[0]) {
        CHECK(m.mask.height() == 64);
        CHECK(m.mask.width() == 64);
        CHECK((m.label == "car" || m.label == "person"));
        CHECK(m.score >= -1.0);
        CHECK(m.score <= 1.0);
    }
    const auto j = r.to_json();
    CHECK(j.at("results").at(0).at("masks").size() == 3);
    CHECK(j.at("height") == 64);

    auto fine = point_request();
    fine["granularity"] = "fine";
    const auto rf = handle_infer(infer_request_from_json(fine), *s);
    REQUIRE(rf.prompts[0].size() == 1);
    CHECK(rf.prompts[0][0].granularity == model::Granularity::fine);
    CHECK(rf.prompts[0][0].mask == r.prompts[0][2].mask);

    json box = {{"frame_id", "f1"},
                {"prompts", {{{"type", "box"}, {"box", {5, 5, 30, 40}}}}},
                {"queries", {"tree"}},
                {"canonical", true}};
    const auto rb = handle_infer(infer_request_from_json(box), *s);
    REQUIRE(rb.prompts[0].size() == 1);
    const std::vector<std::string> allowed{"tree", "object", "things", "stuff", "texture"};
    CHECK(std::find(allowed.begin(), allowed.end(), rb.prompts[0][0].label) != allowed.end());

    CHECK_THROWS_AS(handle_infer(infer_request_from_json(point_request("nope")), *s), NotFoundError);
    auto out = point_request();
    out["prompts"][0]["points"] = {{64, 0}};
    CHECK_THROWS_AS(handle_infer(infer_request_from_json(out), *s), ValidationError);
}

TEST_CASE("inference is referentially transparent and thread safe")
{
    const auto s = make_session();
    const auto req = infer_request_from_json(point_request());
    const auto first = handle_infer(req, *s).to_json();
    CHECK(handle_infer(req, *s).to_json() == first);
    std::vector<json> got(4);
    std::vector<std::thread> ts;
    for (int i = 0; i < 4; ++i) ts.emplace_back([&, i] { got[i] = handle_infer(req, *s).to_json(); });
    for (auto& t : ts) t.join();
    for (const auto& g : got) CHECK(g == first);
}

TEST_CASE("frame store")
{
    testutil::TempDir dir;
    events::save_voxel(voxel(1), dir / "b.vox");
    events::save_voxel(voxel(2), dir / "a.vox");
    const FrameStore fs(dir.path());
    CHECK(fs.ids() == std::vector<std::string>{"a", "b"});
    CHECK_THROWS_AS(fs.get("c"), NotFoundError);
    FrameStore bad;
    auto v = voxel(1);
    v.config.height = 32;
    v.data.resize(3 * 32 * 64);
    bad.add("x", v);
    CHECK_THROWS_AS(Session(model::Model(model::ModelConfig::desk(), 1), {"car"}, std::move(bad)), ConfigError);
    CHECK(voxel_preview_base64(voxel(1)).size() > 100);
}

TEST_CASE("http contract")
{
    Server server(make_session());
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread th([&] { server.listen(); });
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(60, 0);

    auto frames = c.Get("/api/frames");
    REQUIRE(frames);
    CHECK(frames->status == 200);
    const auto fl = json::parse(frames->body);
    REQUIRE(fl.size() == 2);
    CHECK(fl[0].at("frame_id") == "f0");
    CHECK(fl[0].at("width") == 64);
    CHECK(fl[0].at("preview").get<std::string>().rfind("data:image/bmp;base64,", 0) == 0);

    auto ok = c.Post("/api/infer", point_request().dump(), "application/json");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    const auto body = json::parse(ok->body);
    CHECK(body.at("results").at(0).at("masks").size() == 3);
    const auto rle = body["results"][0]["masks"][0]["mask"];
    CHECK(mask_from_json(rle).height() == 64);

    auto nf = c.Post("/api/infer", point_request("nope").dump(), "application/json");
    REQUIRE(nf);
    CHECK(nf->status == 404);
    auto bad = c.Post("/api/infer", "{oops", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    auto invalid = point_request();
    invalid["queries"] = json::array();
    auto iv = c.Post("/api/infer", invalid.dump(), "application/json");
    REQUIRE(iv);
    CHECK(iv->status == 400);
    CHECK(json::parse(iv->body).contains("message"));

    // A swapped-in session serves later requests.
    server.swap(make_session(99));
    auto after = c.Post("/api/infer", point_request().dump(), "application/json");
    REQUIRE(after);
    CHECK(after->status == 200);
    CHECK(json::parse(after->body) != body);

    server.stop();
    th.join();
}

TEST_CASE("cli exit codes")
{
    std::string out, err;
    CHECK(run_cli({"frobnicate"}, &out, &err) == 2);
    CHECK(err.find("unknown subcommand 'frobnicate'") != std::string::npos);
    CHECK(run_cli({"eval", "--bogus-flag"}) == 2);

    testutil::TempDir dir;
    CHECK(run_cli({"synth", "--out", (dir / "corpus").string(), "--kind", "corpus", "--frames", "2"}) == 0);
    CHECK(run_cli({"train", "--manifest", (dir / "corpus" / "manifest.json").string(), "--stage", "2", "--out",
                   (dir / "s2.ckpt").string()},
                  &out, &err) == 2);
    CHECK(err.find("--init") != std::string::npos);
    CHECK(run_cli({"train", "--manifest", (dir / "corpus" / "manifest.json").string(), "--stage", "1",
                   "--iterations", "1", "--batch", "1", "--out", (dir / "s1.ckpt").string()}) == 0);
    CHECK(run_cli({"params", "--ckpt", (dir / "missing.ckpt").string()}) == 1);
    CHECK(run_cli({"params", "--ckpt", (dir / "s1.ckpt").string()}, &out) == 0);
    CHECK(out.find("total") != std::string::npos);

    ::setenv("SEAL_CKPT", (dir / "s1.ckpt").string().c_str(), 1);
    CHECK(run_cli({"params", "--ckpt", (dir / "missing.ckpt").string()}) == 0);
    ::unsetenv("SEAL_CKPT");
}
