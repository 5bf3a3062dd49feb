#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "emf/checkpoint.hpp"
#include "emf/config.hpp"
#include "emf/io.hpp"

using namespace emf;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
    fs::path p = fs::temp_directory_path() / (std::string("emf_io_") + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

bool throws_mentioning(const std::function<void()>& f, const std::string& needle) {
    try {
        f();
    } catch (const ContractViolation& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

Checkpoint sample_checkpoint_struct(std::uint64_t seed) {
    NetworkConfig nc;
    nc.hidden_width = 4;
    nc.depth = 1;
    nc.time_features = 2;
    nc.num_classes = 3;
    nc.aux_head_depth = 1;
    Rng rng(seed);
    FlowNetwork net = FlowNetwork::init(nc, rng, FinalInit::random);

    Checkpoint ck;
    ck.config_text = "run.objective = emf_u\nopt.steps = 5\n";
    ck.step = 41;
    ck.params = net.params;
    ck.ema = net.params;
    for (Tensor& t : ck.ema.tensors)
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] *= 0.5;
    for (const Tensor& p : net.params.tensors) {
        ck.adam_m.push_back(Tensor::randn(p.shape(), rng, 0.1));
        ck.adam_v.push_back(Tensor::randn(p.shape(), rng, 0.01));
    }
    ck.adam_step = 1234;
    Rng state(99);
    state.gauss();
    ck.rng_state = state.serialize();
    return ck;
}

} // namespace

TEST_SUITE("config_io") {

TEST_CASE("empty config text yields the documented defaults") {
    RunConfig c = parse_config("");
    CHECK(c.objective == ObjectiveKind::emf_u);
    CHECK(c.seed == 0);
    CHECK(c.out_dir == "out");
    CHECK(c.data.kind == DatasetKind::eight_gaussians);
    CHECK(c.data.scale == 4.0);
    CHECK(c.data.noise_std == 0.3);
    CHECK(c.net.hidden_width == 128);
    CHECK(c.net.depth == 4);
    CHECK(c.net.time_features == 6);
    CHECK(c.net.num_classes == 0); // unconditional: dataset carries no labels
    CHECK(c.net.prediction == PredictionKind::u);
    CHECK(c.obj.delta_t == 0.01);
    CHECK_FALSE(c.obj.adaptive); // auto mode, non-meanflow objective
    CHECK(c.steps == 20000);
    CHECK(c.batch == 256);
    CHECK(c.ema_decay == 0.999);
    CHECK(c.log_every == 100);
}

TEST_CASE("comments, blank lines and spacing are tolerated") {
    RunConfig c = parse_config(
        "# full-line comment\n"
        "\n"
        "  opt.steps   =  7   # trailing comment\n"
        "\trun.seed=3\n");
    CHECK(c.steps == 7);
    CHECK(c.seed == 3);
}

TEST_CASE("parse errors carry the offending line number") {
    CHECK(throws_mentioning([] { parse_config("opt.steps = 1\nbogus.key = 2\n"); }, "line 2"));
    CHECK(throws_mentioning([] { parse_config("opt.steps = 1\nbogus.key = 2\n"); }, "bogus.key"));
    CHECK(throws_mentioning([] { parse_config("opt.lr = banana\n"); }, "line 1"));
    CHECK(throws_mentioning([] { parse_config("opt.steps = 1x\n"); }, "line 1"));
    CHECK(throws_mentioning([] { parse_config("just some words\n"); }, "line 1"));
    CHECK(throws_mentioning([] { parse_config("opt.steps =\n"); }, "empty value"));
    CHECK(throws_mentioning([] { parse_config("net.activation = relu\n"); }, "silu|tanh"));
    CHECK(throws_mentioning([] { parse_config("data.kind = spiral\n"); }, "spiral"));
}

TEST_CASE("serialize -> parse -> serialize is a fixed point") {
    RunConfig c = parse_config(
        "run.objective = emf_x1\n"
        "run.seed = 17\n"
        "data.kind = labeled_gaussians\n"
        "data.n_classes = 4\n"
        "data.noise_std = 0.05\n"
        "emf.delta_t = 0.015625\n"
        "emf.adaptive = on\n"
        "time.dist = lognormal\n"
        "time.alpha = 0.25\n"
        "opt.lr = 0.000244140625\n"
        "opt.steps = 123\n"
        "cfg.enabled = true\n"
        "cfg.w = 1.5\n"
        "cfg.k = 0.3\n");
    const std::string s1 = serialize_config(c);
    RunConfig c2 = parse_config(s1);
    const std::string s2 = serialize_config(c2);
    CHECK(s1 == s2);
    CHECK(c2.objective == ObjectiveKind::emf_x1);
    CHECK(c2.net.prediction == PredictionKind::x1);
    CHECK(c2.net.num_classes == 4);
    CHECK(c2.obj.adaptive);
    CHECK(c2.times.dist == TimeDist::lognormal);
    CHECK(c2.obj.guidance.w == 1.5);
    CHECK(c2.seed == 17);
}

TEST_CASE("dataset keys apply independent of declaration order") {
    RunConfig a = parse_config("data.scale = 9\ndata.kind = ring_manifold\n");
    CHECK(a.data.kind == DatasetKind::ring_manifold);
    CHECK(a.data.scale == 9.0);
    CHECK(a.data.noise_std == 0.1); // ring default fills the unset field

    RunConfig b = parse_config("data.kind = ring_manifold\ndata.scale = 9\n");
    CHECK(b.data.scale == 9.0);
    CHECK(serialize_config(a) == serialize_config(b));

    RunConfig c = parse_config("data.noise_std = 0\ndata.kind = two_moons\n");
    CHECK(c.data.noise_std == 0.0);
    CHECK(c.data.scale == 2.0);
}

TEST_CASE("adaptive weighting tri-state") {
    CHECK(parse_config("run.objective = meanflow\n").obj.adaptive);
    CHECK_FALSE(parse_config("run.objective = emf_u\n").obj.adaptive);
    CHECK_FALSE(parse_config("run.objective = fm\n").obj.adaptive);
    CHECK(parse_config("run.objective = fm\nemf.adaptive = on\n").obj.adaptive);
    CHECK_FALSE(parse_config("run.objective = meanflow\nemf.adaptive = off\n").obj.adaptive);
}

TEST_CASE("objective-dependent derivations") {
    RunConfig aux = parse_config("run.objective = emf_aux\n");
    CHECK(aux.net.aux_head_depth == 1); // bumped from 0
    RunConfig aux2 = parse_config("run.objective = emf_aux\nnet.aux_head_depth = 3\n");
    CHECK(aux2.net.aux_head_depth == 3); // explicit value kept

    RunConfig u = parse_config("run.objective = emf_u\ndata.kind = labeled_gaussians\n");
    CHECK(u.net.num_classes == 8);
    CHECK(u.net.null_label() == 8);

    // n_classes on an unlabeled dataset is carried but not wired into the net
    RunConfig plain = parse_config("data.kind = two_moons\ndata.n_classes = 5\n");
    CHECK(plain.net.num_classes == 0);
}

TEST_CASE("resolve() rejects inconsistent settings") {
    CHECK_THROWS_AS(parse_config("opt.batch = 0\n"), ContractViolation);
    CHECK_THROWS_AS(parse_config("opt.ema_decay = 1\n"), ContractViolation);
    CHECK_THROWS_AS(parse_config("time.alpha = 1.5\n"), ContractViolation);
    CHECK_THROWS_AS(parse_config("emf.delta_t = 0\n"), ContractViolation);
    CHECK_THROWS_AS(parse_config("net.depth = 0\n"), ContractViolation);
    CHECK_THROWS_AS(parse_config("log.every = 0\n"), ContractViolation);
    CHECK_THROWS_AS(parse_config("run.out =\n"), ContractViolation);
    // guidance needs labels and k < 1, and the aux composite refuses it
    CHECK_THROWS_AS(parse_config("cfg.enabled = true\n"), ContractViolation);
    CHECK_THROWS_AS(
        parse_config("cfg.enabled = true\ndata.kind = labeled_gaussians\ncfg.k = 1\n"),
        ContractViolation);
    CHECK_THROWS_AS(
        parse_config("run.objective = emf_aux\ncfg.enabled = true\ndata.kind = labeled_gaussians\n"),
        ContractViolation);
    CHECK_NOTHROW(parse_config("cfg.enabled = true\ndata.kind = labeled_gaussians\n"));
}

TEST_CASE("format_g17 round trips doubles through text") {
    for (double v : {0.1, 1.0 / 3.0, 0.02, 1e-300, 2.5e300, -17.125, 0.0,
                     6.02214076e23, 3.14159265358979323846, 5e-324}) {
        // strtod rather than std::stod: glibc flags subnormal results with
        // ERANGE and std::stod turns that into out_of_range even though the
        // converted value is exact
        const double back = std::strtod(format_g17(v).c_str(), nullptr);
        CHECK(back == v);
    }
    CHECK(format_g17(1.0) == "1");
    CHECK(format_g17(0.5) == "0.5");
    CHECK(std::signbit(std::stod(format_g17(-0.0))));
}

TEST_CASE("text files round trip bytes") {
    fs::path dir = fresh_dir("text");
    const std::string content = "line one\nline two\n# not a comment here\n";
    const std::string path = (dir / "a.txt").string();
    write_text_file(path, content);
    CHECK(read_text_file(path) == content);
    CHECK_THROWS_AS(read_text_file((dir / "missing.txt").string()), ContractViolation);
    fs::remove_all(dir);
}

TEST_CASE("csv writer emits exactly the documented bytes") {
    fs::path dir = fresh_dir("csv");
    const std::string path = (dir / "m.csv").string();
    write_csv(path, {"step", "loss_mean", "lc"}, {{"0", "1.5", "0.25"}, {"100", "0.75", "0.125"}});
    CHECK(read_text_file(path) == "step,loss_mean,lc\n0,1.5,0.25\n100,0.75,0.125\n");
    fs::remove_all(dir);
}

TEST_CASE("scatter svg is a pure function of its arguments") {
    fs::path dir = fresh_dir("svg");
    Rng rng(31);
    Tensor pts = Tensor::randn({40, 2}, rng);
    std::vector<int> labels(40);
    for (int i = 0; i < 40; ++i) labels[i] = i % 3;
    const std::array<double, 4> box = {-3.0, 3.0, -3.0, 3.0};

    const std::string p1 = (dir / "a.svg").string(), p2 = (dir / "b.svg").string();
    write_scatter_svg(p1, pts, labels, box, "samples", {"alpha", "beta", "gamma"});
    write_scatter_svg(p2, pts, labels, box, "samples", {"alpha", "beta", "gamma"});
    const std::string s1 = read_text_file(p1);
    CHECK(s1 == read_text_file(p2));
    CHECK(s1.find("<svg") != std::string::npos);
    CHECK(s1.find("samples") != std::string::npos);
    CHECK(s1.find("alpha") != std::string::npos);

    // unlabeled variant renders without a legend
    const std::string p3 = (dir / "c.svg").string();
    write_scatter_svg(p3, pts, {}, box, "plain");
    CHECK(read_text_file(p3).find("alpha") == std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("checkpoint encode/decode round trips byte for byte") {
    Checkpoint ck = sample_checkpoint_struct(7);
    const std::string bytes = encode_checkpoint(ck);
    Checkpoint back = decode_checkpoint(bytes);
    CHECK(encode_checkpoint(back) == bytes);

    CHECK(back.config_text == ck.config_text);
    CHECK(back.step == 41);
    CHECK(back.adam_step == 1234);
    CHECK(back.rng_state == ck.rng_state);
    REQUIRE(back.params.count() == ck.params.count());
    for (std::size_t p = 0; p < ck.params.count(); ++p) {
        CHECK(back.params.names[p] == ck.params.names[p]);
        REQUIRE(back.params.tensors[p].same_shape(ck.params.tensors[p]));
        for (std::size_t i = 0; i < ck.params.tensors[p].numel(); ++i) {
            CHECK(back.params.tensors[p][i] == ck.params.tensors[p][i]);
            CHECK(back.ema.tensors[p][i] == ck.ema.tensors[p][i]);
        }
    }
    REQUIRE(back.adam_m.size() == ck.adam_m.size());
    for (std::size_t p = 0; p < ck.adam_m.size(); ++p)
        for (std::size_t i = 0; i < ck.adam_m[p].numel(); ++i) {
            CHECK(back.adam_m[p][i] == ck.adam_m[p][i]);
            CHECK(back.adam_v[p][i] == ck.adam_v[p][i]);
        }

    // the restored rng continues the stream exactly
    Rng expect(99);
    expect.gauss();
    Rng got(0);
    got.deserialize(back.rng_state);
    for (int i = 0; i < 5; ++i) CHECK(got.next_u64() == expect.next_u64());
}

TEST_CASE("checkpoint files round trip and corruption is rejected") {
    fs::path dir = fresh_dir("ckpt");
    Checkpoint ck = sample_checkpoint_struct(13);
    const std::string path = (dir / "run.emfckpt").string();
    save_checkpoint(path, ck);
    Checkpoint back = load_checkpoint(path);
    CHECK(encode_checkpoint(back) == encode_checkpoint(ck));

    const std::string bytes = encode_checkpoint(ck);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() / 2)), ContractViolation);
    CHECK_THROWS_AS(decode_checkpoint(std::string()), ContractViolation);
    std::string mangled = bytes;
    mangled[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(mangled), ContractViolation);

    CHECK_THROWS_AS(load_checkpoint((dir / "nope.emfckpt").string()), ContractViolation);
    fs::remove_all(dir);
}

} // TEST_SUITE
