#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "drcb/checkpoint.hpp"
#include "drcb/image.hpp"
#include "drcb/io.hpp"

using namespace drcb;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir() {
    fs::path d = fs::temp_directory_path() / "drcb_ckpt_test";
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("checkpoint round-trips tensors bitwise with names, shapes and metadata") {
    Rng r = Rng::stream(42, 0);
    NamedTensors named;
    named.emplace_back("w", Tensor::uniform({3, 4}, -2.0, 2.0, r));
    named.emplace_back("b", Tensor::from_data({4}, {1e-300, -0.0, 3.14, 1e300}));
    json meta{{"kind", "test"}, {"steps", 17}};

    fs::path p = tmpdir() / "roundtrip.ckpt";
    save_checkpoint(p.string(), named, meta);
    Checkpoint ck = load_checkpoint(p.string());

    REQUIRE(ck.meta.at("kind") == "test");
    REQUIRE(ck.meta.at("steps") == 17);
    REQUIRE(ck.tensors.size() == 2);
    REQUIRE(ck.tensors[0].first == "w");
    REQUIRE(ck.tensors[1].first == "b");
    REQUIRE(ck.tensors[0].second.shape() == std::vector<int>{3, 4});
    // bitwise: doubles stored as raw little-endian words
    REQUIRE(ck.tensors[0].second.data() == named[0].second.data());
    REQUIRE(ck.tensors[1].second.data() == named[1].second.data());
    REQUIRE(std::signbit(ck.tensors[1].second.data()[1]));
}

TEST_CASE("checkpoint save then save again produces identical bytes") {
    Rng r = Rng::stream(7, 1);
    NamedTensors named;
    named.emplace_back("layer.weight", Tensor::uniform({8, 8}, -1.0, 1.0, r));
    fs::path a = tmpdir() / "a.ckpt";
    fs::path b = tmpdir() / "b.ckpt";
    save_checkpoint(a.string(), named, json{{"seed", 7}});
    save_checkpoint(b.string(), named, json{{"seed", 7}});
    REQUIRE(read_file(a.string()) == read_file(b.string()));
}

TEST_CASE("corrupt or truncated checkpoints are rejected with a reason") {
    fs::path p = tmpdir() / "bad.ckpt";
    write_file_atomic(p.string(), "not a checkpoint at all");
    REQUIRE_THROWS_WITH(load_checkpoint(p.string()), Catch::Matchers::ContainsSubstring("magic"));

    // valid file cut short
    NamedTensors named;
    named.emplace_back("w", Tensor::from_data({4}, {1, 2, 3, 4}));
    fs::path good = tmpdir() / "good.ckpt";
    save_checkpoint(good.string(), named, json::object());
    std::string blob = read_file(good.string());
    write_file_atomic(p.string(), blob.substr(0, blob.size() - 9));
    REQUIRE_THROWS(load_checkpoint(p.string()));

    REQUIRE_THROWS(load_checkpoint((tmpdir() / "missing.ckpt").string()));
}

TEST_CASE("atomic write leaves no temp files and replaces content whole") {
    fs::path p = tmpdir() / "atomic.txt";
    write_file_atomic(p.string(), "first");
    write_file_atomic(p.string(), "second");
    REQUIRE(read_file(p.string()) == "second");
    int stray = 0;
    for (const auto& e : fs::directory_iterator(tmpdir()))
        if (e.path().filename().string().find(".tmp") != std::string::npos) ++stray;
    REQUIRE(stray == 0);
}

TEST_CASE("ppm encode/decode round-trips within 8-bit quantization") {
    Rng r = Rng::stream(9, 2);
    Tensor img = Tensor::uniform({3, 5, 4}, -1.0, 1.0, r);
    Tensor back = decode_ppm(encode_ppm(img));
    REQUIRE(back.shape() == img.shape());
    // one 8-bit level spans 2/255 of the [-1,1] range
    for (std::size_t i = 0; i < img.numel(); ++i)
        REQUIRE(back.data()[i] == Approx(img.data()[i]).margin(1.01 / 255.0 * 2.0));
    // decode(encode(decode(encode(x)))) is exact: quantization is idempotent
    Tensor once = decode_ppm(encode_ppm(img));
    Tensor twice = decode_ppm(encode_ppm(once));
    REQUIRE(once.data() == twice.data());
}

TEST_CASE("ppm encoder clamps out-of-range values instead of wrapping") {
    Tensor img = Tensor::from_data({3, 1, 2}, {-5.0, 5.0, -5.0, 5.0, -5.0, 5.0});
    Tensor back = decode_ppm(encode_ppm(img));
    REQUIRE(back.data()[0] == Approx(-1.0));
    REQUIRE(back.data()[1] == Approx(1.0));
}

TEST_CASE("ppm decoder rejects malformed headers") {
    REQUIRE_THROWS(decode_ppm("P3\n2 2\n255\n"));           // wrong magic
    REQUIRE_THROWS(decode_ppm("P6\n2 2\n65535\n"));         // unsupported depth
    REQUIRE_THROWS(decode_ppm("P6\n2 2\n255\n\x00\x01"));   // truncated pixels
}

TEST_CASE("stack and slice invert each other") {
    Rng r = Rng::stream(11, 3);
    std::vector<Tensor> imgs;
    for (int i = 0; i < 4; ++i) imgs.push_back(Tensor::uniform({3, 6, 6}, -1.0, 1.0, r));
    Tensor batch = stack_images(imgs);
    REQUIRE(batch.shape() == std::vector<int>{4, 3, 6, 6});
    for (int i = 0; i < 4; ++i) {
        Tensor s = slice_image(batch, i);
        REQUIRE(s.data() == imgs[static_cast<std::size_t>(i)].data());
    }
    REQUIRE_THROWS(slice_image(batch, 4));
}
