#include "aniadapter/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "aniadapter/error.hpp"

namespace aniadapter {

static const char* kMagic = "aniadapter-archive 1";

std::string TensorArchive::meta(const std::string& key, const std::string& fallback) const {
    auto it = meta_.find(key);
    return it == meta_.end() ? fallback : it->second;
}

void TensorArchive::add(const std::string& name, const Mat& tensor) {
    if (name.find(' ') != std::string::npos)
        throw DataError("tensor name may not contain spaces: " + name);
    if (index_.count(name) == 0) order_.push_back(name);
    index_[name] = tensor;
}

const Mat& TensorArchive::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("archive has no tensor named '" + name + "'");
    return it->second;
}

std::vector<std::string> TensorArchive::names() const { return order_; }

void TensorArchive::save(const std::string& path) const {
    // Payload: tensors in insertion order, row-major doubles.
    std::vector<double> payload;
    std::vector<size_t> offsets;
    for (const auto& name : order_) {
        const Mat& m = index_.at(name);
        offsets.push_back(payload.size());
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) payload.push_back(m(i, j));
    }
    const size_t payload_bytes = payload.size() * sizeof(double);
    uint32_t crc = crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), uInt(payload_bytes));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write archive: " + path);
    f << kMagic << "\n";
    for (const auto& [k, v] : meta_) f << "meta " << k << " " << v << "\n";
    for (size_t i = 0; i < order_.size(); ++i) {
        const Mat& m = index_.at(order_[i]);
        f << "tensor " << order_[i] << " " << m.rows() << " " << m.cols() << " " << offsets[i]
          << "\n";
    }
    f << "payload_bytes " << payload_bytes << "\n";
    f << "payload_crc32 " << crc << "\n";
    f << "end\n";
    f.write(reinterpret_cast<const char*>(payload.data()), std::streamsize(payload_bytes));
    if (!f) throw DataError("short write on archive: " + path);
}

TensorArchive TensorArchive::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read archive: " + path);

    std::string line;
    if (!std::getline(f, line) || line != kMagic)
        throw DataError("not an aniadapter archive: " + path);

    TensorArchive ar;
    struct Entry {
        std::string name;
        Eigen::Index rows, cols;
        size_t offset;
    };
    std::vector<Entry> entries;
    size_t payload_bytes = 0;
    uint32_t expect_crc = 0;
    bool have_bytes = false, have_crc = false, have_end = false;

    while (std::getline(f, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value[0] == ' ') value.erase(0, 1);
            ar.meta_[key] = value;
        } else if (tag == "tensor") {
            Entry e;
            ls >> e.name >> e.rows >> e.cols >> e.offset;
            if (!ls) throw DataError("bad tensor index line in " + path);
            entries.push_back(e);
        } else if (tag == "payload_bytes") {
            ls >> payload_bytes;
            have_bytes = true;
        } else if (tag == "payload_crc32") {
            ls >> expect_crc;
            have_crc = true;
        } else if (tag == "end") {
            have_end = true;
            break;
        } else {
            throw DataError("unknown archive header line in " + path + ": " + line);
        }
    }
    if (!have_end || !have_bytes || !have_crc)
        throw DataError("archive header incomplete: " + path);

    std::vector<double> payload(payload_bytes / sizeof(double));
    f.read(reinterpret_cast<char*>(payload.data()), std::streamsize(payload_bytes));
    if (size_t(f.gcount()) != payload_bytes)
        throw DataError("archive integrity: truncated payload in " + path);
    uint32_t crc = crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), uInt(payload_bytes));
    if (crc != expect_crc) throw DataError("archive integrity: checksum mismatch in " + path);

    for (const auto& e : entries) {
        size_t need = e.offset + size_t(e.rows) * size_t(e.cols);
        if (need > payload.size())
            throw DataError("archive integrity: tensor '" + e.name + "' out of bounds in " + path);
        Mat m(e.rows, e.cols);
        size_t p = e.offset;
        for (Eigen::Index i = 0; i < e.rows; ++i)
            for (Eigen::Index j = 0; j < e.cols; ++j) m(i, j) = payload[p++];
        ar.add(e.name, m);
    }
    return ar;
}

}  // namespace aniadapter
