#pragma once

#include <map>
#include <string>
#include <vector>

#include "aniadapter/linalg.hpp"

namespace aniadapter {

// Archive of named float64 tensors with a plain-text header.
//
// Layout:
//   line 1      magic "aniadapter-archive 1"
//   meta lines  "meta <key> <value...>"          (version, scope, k, dprime, step, ...)
//   index lines "tensor <name> <rows> <cols> <offset>"   offset in doubles
//   guard lines "payload_bytes <n>" and "payload_crc32 <crc>"
//   "end" line, then the raw little-endian float64 payload.
//
// Load verifies payload length and CRC; a truncated or corrupted file is an
// integrity error, not a partial read.
class TensorArchive {
public:
    void set_meta(const std::string& key, const std::string& value) { meta_[key] = value; }
    std::string meta(const std::string& key, const std::string& fallback = "") const;
    const std::map<std::string, std::string>& all_meta() const { return meta_; }

    void add(const std::string& name, const Mat& tensor);
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    const Mat& get(const std::string& name) const;
    std::vector<std::string> names() const;  // insertion order

    void save(const std::string& path) const;
    static TensorArchive load(const std::string& path);

private:
    std::map<std::string, std::string> meta_;
    std::map<std::string, Mat> index_;
    std::vector<std::string> order_;
};

}  // namespace aniadapter
