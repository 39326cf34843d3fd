#include "elberto/checkpoint.hpp"

#include <bit>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "elberto/rng.hpp"
#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace elberto::checkpoint {

namespace fs = std::filesystem;
using nlohmann::json;
using objectives::FullModel;

namespace {

template <typename T>
const char* dtype_name() {
    return sizeof(T) == 4 ? "f32" : "f64";
}

template <typename T>
json tensor_entries(const FullModel<T>& m, uint64_t& offset, const std::string& prefix) {
    json arr = json::array();
    for_each_model_tensor(m, [&](const std::string& name, const Mat<T>& t) {
        arr.push_back({{"name", prefix + name},
                       {"rows", t.rows},
                       {"cols", t.cols},
                       {"offset", offset}});
        offset += t.size() * sizeof(T);
    });
    return arr;
}

template <typename T>
void write_tensors(std::ofstream& out, const FullModel<T>& m) {
    for_each_model_tensor(m, [&](const std::string&, const Mat<T>& t) {
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(T)));
    });
}

json config_json(const model::EncoderConfig& c) {
    return {{"vocab_size", c.vocab_size}, {"max_len", c.max_len}, {"d_model", c.d_model},
            {"n_heads", c.n_heads},       {"n_layers", c.n_layers}, {"d_ff", c.d_ff},
            {"dropout_p", c.dropout_p},   {"n_types", c.n_types}};
}

model::EncoderConfig config_from_json(const json& j) {
    model::EncoderConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.dropout_p = j.at("dropout_p").get<double>();
    c.n_types = j.at("n_types").get<int>();
    return c;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

template <typename T>
void read_tensors(std::ifstream& in, const json& entries, FullModel<T>& m,
                  const std::string& prefix, const std::string& origin) {
    size_t idx = 0;
    for_each_model_tensor(m, [&](const std::string& name, Mat<T>& t) {
        if (idx >= entries.size()) throw std::runtime_error(origin + ": manifest too short");
        const json& e = entries[idx++];
        if (e.at("name").get<std::string>() != prefix + name ||
            e.at("rows").get<int>() != t.rows || e.at("cols").get<int>() != t.cols) {
            throw std::runtime_error(origin + ": tensor '" + prefix + name +
                                     "' missing or shape mismatch in manifest");
        }
        in.seekg(static_cast<std::streamoff>(e.at("offset").get<uint64_t>()));
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(T)));
        if (!in) throw std::runtime_error(origin + ": short read for tensor " + name);
    });
    if (idx != entries.size()) throw std::runtime_error(origin + ": manifest has extra tensors");
}

}  // namespace

template <typename T>
void save_checkpoint(const std::string& dir, const Checkpoint<T>& cp) {
    fs::create_directories(dir);
    uint64_t offset = 0;
    json manifest;
    manifest["format"] = "elberto-checkpoint-v1";
    manifest["dtype"] = dtype_name<T>();
    manifest["epoch"] = cp.epoch;
    manifest["config"] = config_json(cp.model.config());
    manifest["tensors"] = tensor_entries(cp.model, offset, "");
    if (cp.has_optimizer) {
        json opt;
        opt["step"] = cp.adam_step;
        json moments = tensor_entries(cp.adam_m, offset, "adam_m.");
        for (auto& e : tensor_entries(cp.adam_v, offset, "adam_v.")) moments.push_back(e);
        opt["tensors"] = moments;
        manifest["optimizer"] = opt;
    }

    {
        std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write manifest in " + dir);
        out << manifest.dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(dir) / "params.bin", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write params.bin in " + dir);
        write_tensors(out, cp.model);
        if (cp.has_optimizer) {
            write_tensors(out, cp.adam_m);
            write_tensors(out, cp.adam_v);
        }
    }
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& dir) {
    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    const json manifest = json::parse(read_file(manifest_path));
    if (manifest.at("dtype").get<std::string>() != dtype_name<T>()) {
        throw std::runtime_error(dir + ": checkpoint dtype is " +
                                 manifest.at("dtype").get<std::string>() + ", expected " +
                                 dtype_name<T>());
    }
    Checkpoint<T> cp;
    cp.epoch = manifest.value("epoch", -1);
    const model::EncoderConfig cfg = config_from_json(manifest.at("config"));
    cp.model = FullModel<T>::shaped(cfg);

    std::ifstream in(fs::path(dir) / "params.bin", std::ios::binary);
    if (!in) throw std::runtime_error("cannot open params.bin in " + dir);
    read_tensors(in, manifest.at("tensors"), cp.model, "", dir);

    if (manifest.contains("optimizer")) {
        cp.has_optimizer = true;
        cp.adam_step = manifest["optimizer"].at("step").get<long long>();
        cp.adam_m = FullModel<T>::shaped(cfg);
        cp.adam_v = FullModel<T>::shaped(cfg);
        const json& moments = manifest["optimizer"].at("tensors");
        const size_t half = moments.size() / 2;
        json m_entries = json::array();
        json v_entries = json::array();
        for (size_t i = 0; i < moments.size(); ++i) {
            (i < half ? m_entries : v_entries).push_back(moments[i]);
        }
        read_tensors(in, m_entries, cp.adam_m, "adam_m.", dir);
        read_tensors(in, v_entries, cp.adam_v, "adam_v.", dir);
    }
    return cp;
}

std::string checkpoint_dtype(const std::string& dir) {
    const json manifest = json::parse(read_file((fs::path(dir) / "manifest.json").string()));
    return manifest.at("dtype").get<std::string>();
}

std::string file_fingerprint(const std::string& path) {
    const uint64_t h = fnv1a64(read_file(path));
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::string checkpoint_fingerprint(const std::string& dir) {
    return file_fingerprint((fs::path(dir) / "manifest.json").string());
}

template void save_checkpoint<float>(const std::string&, const Checkpoint<float>&);
template void save_checkpoint<double>(const std::string&, const Checkpoint<double>&);
template Checkpoint<float> load_checkpoint<float>(const std::string&);
template Checkpoint<double> load_checkpoint<double>(const std::string&);

}  // namespace elberto::checkpoint
