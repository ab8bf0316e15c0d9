#include <cstdint>
#include <fstream>

#include "fontnet/trainer.hpp"

namespace fontnet {

namespace {

constexpr char kMagic[8] = {'F', 'N', 'E', 'T', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const std::uint64_t n = read_u64(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::istream& is, std::vector<double>& v) {
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

struct CheckpointCodec {
    static void save(const Trainer& t, const std::string& path) {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw IOError("cannot write checkpoint " + path);
        os.write(kMagic, sizeof(kMagic));
        write_string(os, t.cfg_.to_json());
        write_u64(os, static_cast<std::uint64_t>(t.step_));
        write_string(os, t.rng_.serialize());
        write_u64(os, static_cast<std::uint64_t>(t.opt_g_.step_count));
        write_u64(os, static_cast<std::uint64_t>(t.opt_d_.step_count));
        write_u64(os, static_cast<std::uint64_t>(t.opt_sep_.step_count));

        nn::ParamList params = const_cast<Trainer&>(t).model_.all_params();
        write_u64(os, params.size());
        for (auto& [name, p] : params) {
            write_string(os, name);
            write_u64(os, p->value.shape.size());
            for (int d : p->value.shape) write_u64(os, static_cast<std::uint64_t>(d));
            write_doubles(os, p->value.v);
            write_doubles(os, p->m.v);
            write_doubles(os, p->v.v);
        }
        if (!os) throw IOError("checkpoint write failed: " + path);

        // JSON config sidecar for human inspection and CLI reuse
        std::ofstream side(path + ".json");
        side << t.cfg_.to_json() << "\n";
    }

    static Trainer load(const std::string& path, const Corpus& corpus, DatasetSplit split) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw IOError("cannot read checkpoint " + path);
        char magic[8];
        is.read(magic, sizeof(magic));
        if (!is || !std::equal(magic, magic + 8, kMagic))
            throw IOError("bad checkpoint magic in " + path);

        TrainConfig cfg = TrainConfig::from_json(read_string(is));
        Trainer t(cfg, corpus, std::move(split));
        t.step_ = static_cast<long>(read_u64(is));
        t.rng_.deserialize(read_string(is));
        t.opt_g_.step_count = static_cast<long>(read_u64(is));
        t.opt_d_.step_count = static_cast<long>(read_u64(is));
        t.opt_sep_.step_count = static_cast<long>(read_u64(is));

        nn::ParamList params = t.model_.all_params();
        std::map<std::string, nn::Param*> by_name;
        for (auto& [name, p] : params) by_name[name] = p;

        const std::uint64_t n = read_u64(is);
        if (n != params.size()) throw IOError("checkpoint parameter group count mismatch");
        for (std::uint64_t i = 0; i < n; ++i) {
            const std::string name = read_string(is);
            auto it = by_name.find(name);
            if (it == by_name.end()) throw IOError("unknown parameter group " + name);
            nn::Param* p = it->second;
            const std::uint64_t nd = read_u64(is);
            std::vector<int> shape(nd);
            for (auto& d : shape) d = static_cast<int>(read_u64(is));
            if (shape != p->value.shape) throw IOError("shape mismatch for " + name);
            read_doubles(is, p->value.v);
            read_doubles(is, p->m.v);
            read_doubles(is, p->v.v);
        }
        if (!is) throw IOError("truncated checkpoint " + path);
        return t;
    }
};

void Trainer::save_checkpoint(const std::string& path) const { CheckpointCodec::save(*this, path); }

Trainer Trainer::load_checkpoint(const std::string& path, const Corpus& corpus,
                                 DatasetSplit split) {
    return CheckpointCodec::load(path, corpus, std::move(split));
}

}  // namespace fontnet
