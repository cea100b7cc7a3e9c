#include "ddpmot/tt_io.hpp"

#include "ddpmot/error.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace ddpmot {

static_assert(std::endian::native == std::endian::little, "container format assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'D', 'D', 'P', 'M', 'O', 'T', 'T', 'T'};

}  // namespace

void write_tt(std::ostream& out, const TTTensor& t) {
    const auto ranks = t.ranks();
    nlohmann::json header;
    header["d"] = t.dim();
    header["mode_sizes"] = t.mode_sizes();
    header["ranks"] = ranks;
    // cores_offset depends on the header length, which depends on cores_offset; iterate to a fixed point.
    std::uint64_t offset = 0;
    std::string text;
    for (int pass = 0; pass < 4; ++pass) {
        header["cores_offset"] = offset;
        text = header.dump();
        const std::uint64_t needed = (16 + text.size() + 7) / 8 * 8;
        if (needed == offset) break;
        offset = needed;
    }
    const std::uint64_t length = text.size();
    out.write(kMagic.data(), kMagic.size());
    out.write(reinterpret_cast<const char*>(&length), sizeof(length));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    const std::size_t pad = offset - 16 - text.size();
    const std::array<char, 8> zeros{};
    out.write(zeros.data(), static_cast<std::streamsize>(pad));
    for (const auto& c : t.cores()) {
        out.write(reinterpret_cast<const char*>(c.values.data()),
                  static_cast<std::streamsize>(c.values.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write_tt: stream failure");
}

TTTensor read_tt(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw InvalidInput("read_tt: not a TT container");
    std::uint64_t length = 0;
    in.read(reinterpret_cast<char*>(&length), sizeof(length));
    if (!in || length > (1u << 26)) throw InvalidInput("read_tt: bad header length");
    std::string text(length, '\0');
    in.read(text.data(), static_cast<std::streamsize>(length));
    if (!in) throw InvalidInput("read_tt: truncated header");

    const auto header = nlohmann::json::parse(text);
    const auto d = header.at("d").get<std::size_t>();
    const auto sizes = header.at("mode_sizes").get<std::vector<std::size_t>>();
    const auto ranks = header.at("ranks").get<std::vector<std::size_t>>();
    const auto offset = header.at("cores_offset").get<std::uint64_t>();
    if (sizes.size() != d || ranks.size() != d + 1 || offset < 16 + length) {
        throw InvalidInput("read_tt: inconsistent header");
    }
    in.ignore(static_cast<std::streamsize>(offset - 16 - length));

    std::vector<TTCore> cores;
    for (std::size_t k = 0; k < d; ++k) {
        TTCore c(ranks[k], sizes[k], ranks[k + 1]);
        in.read(reinterpret_cast<char*>(c.values.data()), static_cast<std::streamsize>(c.values.size() * sizeof(double)));
        if (!in) throw InvalidInput("read_tt: truncated core data");
        cores.push_back(std::move(c));
    }
    return TTTensor(std::move(cores));
}

void save_tt(const std::filesystem::path& path, const TTTensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_tt: cannot open " + path.string());
    write_tt(out, t);
}

TTTensor load_tt(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("load_tt: cannot open " + path.string());
    return read_tt(in);
}

}  // namespace ddpmot
