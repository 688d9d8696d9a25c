#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "team/errors.hpp"
#include "team/io.hpp"

using namespace team;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("team_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Two 2x2 images and their labels.
std::vector<unsigned char> image_fixture(unsigned char magic_low = 0x03) {
  return {0, 0, 0x08, magic_low, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 0, 255, 51, 102, 255, 255, 0, 0};
}
std::vector<unsigned char> label_fixture() { return {0, 0, 0x08, 0x01, 0, 0, 0, 2, 7, 3}; }

}  // namespace

TEST(Idx, ParsesFixture) {
  TempDir dir;
  write_bytes(dir / "img", image_fixture());
  write_bytes(dir / "lbl", label_fixture());
  const Dataset d = load_idx(dir / "img", dir / "lbl");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.image(0).height(), 2);
  EXPECT_EQ(d.image(0).width(), 2);
  EXPECT_EQ(d.image(0)[0], 0.0);
  EXPECT_EQ(d.image(0)[1], 1.0);
  EXPECT_DOUBLE_EQ(d.image(0)[2], 0.2);
  EXPECT_DOUBLE_EQ(d.image(0)[3], 0.4);
  EXPECT_EQ(d.label(0), 7);
  EXPECT_EQ(d.label(1), 3);
}

TEST(Idx, RejectsBadMagicTruncationAndMismatch) {
  TempDir dir;
  write_bytes(dir / "lbl", label_fixture());
  write_bytes(dir / "bad", image_fixture(0x01));
  EXPECT_THROW(load_idx(dir / "bad", dir / "lbl"), FormatError);
  auto cut = image_fixture();
  cut.pop_back();
  write_bytes(dir / "cut", cut);
  EXPECT_THROW(load_idx(dir / "cut", dir / "lbl"), LengthError);
  write_bytes(dir / "img", image_fixture());
  write_bytes(dir / "one", {0, 0, 0x08, 0x01, 0, 0, 0, 1, 7});
  EXPECT_THROW(load_idx(dir / "img", dir / "one"), ConsistencyError);
  EXPECT_THROW(load_idx(dir / "missing", dir / "lbl"), ResourceError);
  write_bytes(dir / "big", {0, 0, 0x08, 0x01, 0, 0, 0, 2, 7, 12});
  EXPECT_THROW(load_idx(dir / "img", dir / "big"), DomainError);
}

TEST(Idx, SaveLoadRoundTrip) {
  TempDir dir;
  write_bytes(dir / "img", image_fixture());
  write_bytes(dir / "lbl", label_fixture());
  const Dataset d = load_idx(dir / "img", dir / "lbl");
  save_idx(d, dir / "img2", dir / "lbl2");
  EXPECT_EQ(read_bytes(dir / "img2"), image_fixture());
  EXPECT_EQ(read_bytes(dir / "lbl2"), label_fixture());
}

TEST(Idx, LabelHistogramMatchesIndependentParser) {
  const fs::path images = fs::path(TEAM_DATA_DIR) / "mnist" / "mnist-10k-images-idx3-ubyte";
  const fs::path labels = fs::path(TEAM_DATA_DIR) / "mnist" / "mnist-10k-labels-idx1-ubyte";
  if (!fs::exists(images) || !fs::exists(labels)) GTEST_SKIP() << "MNIST subset not present";
  const std::string cmd =
      "python3 -c \"import struct,sys,collections;b=open(sys.argv[1],'rb').read();"
      "m,n=struct.unpack('>II',b[:8]);c=collections.Counter(b[8:8+n]);"
      "i=open(sys.argv[2],'rb').read();s=sum(i[16:16+n*784]);"
      "print(m,n,' '.join(str(c[k]) for k in range(10)),s)\" '" +
      labels.string() + "' '" + images.string() + "' 2>/dev/null";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  std::array<char, 512> buf{};
  if (!pipe || !fgets(buf.data(), static_cast<int>(buf.size()), pipe.get())) {
    GTEST_SKIP() << "python3 unavailable";
  }
  std::istringstream in(buf.data());
  long magic = 0, n = 0, pixel_sum = 0;
  std::array<long, 10> hist{};
  in >> magic >> n;
  for (auto& h : hist) in >> h;
  in >> pixel_sum;
  ASSERT_EQ(magic, 0x801);
  const Dataset d = load_idx(images, labels);
  ASSERT_EQ(static_cast<long>(d.size()), n);
  std::array<long, 10> ours{};
  double sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    ++ours[static_cast<std::size_t>(d.label(i))];
    sum += d.image(i).pixels().sum();
  }
  EXPECT_EQ(ours, hist);
  EXPECT_NEAR(sum * 255.0, static_cast<double>(pixel_sum), 1e-3);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  const Model m = Model::random({7, 5, 3}, Activation::softplus, 42);
  save_checkpoint(m, dir / "a.ckpt", "epochs=3");
  const LoadedCheckpoint loaded = load_checkpoint_with_metadata(dir / "a.ckpt");
  EXPECT_TRUE(loaded.model == m);
  EXPECT_EQ(loaded.metadata, "epochs=3");
  EXPECT_EQ(loaded.model.seed(), 42u);
  Rng rng(1);
  const Vector x = oracle::random_vector(rng, 7, 1.0);
  EXPECT_EQ(loaded.model.logits(x), m.logits(x));
  save_checkpoint(loaded.model, dir / "b.ckpt", "epochs=3");
  EXPECT_EQ(read_bytes(dir / "a.ckpt"), read_bytes(dir / "b.ckpt"));
}

TEST(Checkpoint, RejectsDamage) {
  TempDir dir;
  save_checkpoint(Model::random({4, 3}, Activation::tanh, 1), dir / "ok.ckpt");
  auto bytes = read_bytes(dir / "ok.ckpt");

  auto cut = bytes;
  cut.resize(cut.size() - 3);
  write_bytes(dir / "cut.ckpt", cut);
  EXPECT_THROW(load_checkpoint(dir / "cut.ckpt"), LengthError);

  auto extra = bytes;
  extra.push_back(0);
  write_bytes(dir / "extra.ckpt", extra);
  EXPECT_THROW(load_checkpoint(dir / "extra.ckpt"), LengthError);

  auto future = bytes;
  future[4] = static_cast<unsigned char>(kCheckpointVersion + 1);
  write_bytes(dir / "future.ckpt", future);
  EXPECT_THROW(load_checkpoint(dir / "future.ckpt"), VersionError);

  auto magic = bytes;
  magic[0] = 'X';
  write_bytes(dir / "magic.ckpt", magic);
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), FormatError);

  EXPECT_THROW(load_checkpoint(dir / "absent.ckpt"), ResourceError);
}

TEST(Synth, Images) {
  const Image black = synth_image(SynthKind::all_black, 28, 28);
  const Image white = synth_image(SynthKind::all_white, 28, 28);
  EXPECT_EQ(black.size(), 784);
  EXPECT_EQ(black.pixels().maxCoeff(), 0.0);
  EXPECT_EQ(white.pixels().minCoeff(), 1.0);
  const Image n1 = synth_image(SynthKind::uniform_noise, 4, 4, 3);
  EXPECT_EQ(n1, synth_image(SynthKind::uniform_noise, 4, 4, 3));
  EXPECT_FALSE(n1 == synth_image(SynthKind::uniform_noise, 4, 4, 4));
  EXPECT_GE(n1.pixels().minCoeff(), 0.0);
  EXPECT_LE(n1.pixels().maxCoeff(), 1.0);
  EXPECT_EQ(parse_synth_kind("black"), SynthKind::all_black);
  EXPECT_THROW(parse_synth_kind("grey"), ConfigError);
}
