#include "cvkaf/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace cvkaf {

namespace {

void put(std::ostream& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " %.17g", v);
    out << buf;
}

void put_block(std::ostream& out, const char* name, std::span<const cplx> v) {
    out << name;
    for (cplx c : v) {
        put(out, c.real());
        put(out, c.imag());
    }
    out << '\n';
}

void put_block(std::ostream& out, const char* name, std::span<const double> v) {
    out << name;
    for (double d : v) put(out, d);
    out << '\n';
}

class Reader {
  public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::string word() {
        std::string w;
        if (!(in_ >> w)) throw CheckpointError("checkpoint: unexpected end of input");
        return w;
    }
    void expect(const std::string& w) {
        const std::string got = word();
        if (got != w) throw CheckpointError("checkpoint: expected '" + w + "', found '" + got + "'");
    }
    double number() {
        const std::string w = word();
        double v = 0.0;
        auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
        if (ec != std::errc{} || p != w.data() + w.size())
            throw CheckpointError("checkpoint: bad number '" + w + "'");
        return v;
    }
    std::size_t count() {
        const double v = number();
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
            throw CheckpointError("checkpoint: bad count");
        return static_cast<std::size_t>(v);
    }
    void fill(const char* name, std::span<cplx> v) {
        expect(name);
        for (cplx& c : v) {
            const double re = number();
            c = {re, number()};
        }
    }
    void fill(const char* name, std::span<double> v) {
        expect(name);
        for (double& d : v) d = number();
    }

  private:
    std::istream& in_;
};

OutputHead parse_head(const std::string& s) {
    for (auto h : {OutputHead::Regression, OutputHead::MagnitudeSoftmax, OutputHead::RealSoftmax})
        if (to_string(h) == s) return h;
    throw CheckpointError("checkpoint: unknown head '" + s + "'");
}

} // namespace

void save_network(std::ostream& out, const Network& net) {
    out << "cvkaf-network " << kCheckpointVersion << '\n';
    out << "input_dim " << net.input_dim << '\n';
    out << "head " << to_string(net.head) << '\n';
    out << "real_valued " << (net.real_valued ? 1 : 0) << '\n';

    std::shared_ptr<const KernelDictionary> dict;
    for (const auto& l : net.layers)
        if (l.activation.params().dict) {
            if (dict && dict != l.activation.params().dict)
                throw CheckpointError("checkpoint: layers must share one dictionary");
            dict = l.activation.params().dict;
        }
    if (dict) {
        out << "dictionary " << (dict->two_dimensional ? "2d " : "1d ") << dict->size();
        put(out, dict->axis.front());
        put(out, dict->axis.back());
        out << '\n';
    } else {
        out << "dictionary none\n";
    }

    out << "layers " << net.layers.size() << '\n';
    for (const auto& l : net.layers) {
        const Activation& a = l.activation;
        const ActivationParams& p = a.params();
        out << "layer " << l.outputs() << ' ' << l.inputs() << ' ' << to_string(a.kind()) << ' '
            << to_string(p.kernel) << '\n';
        put_block(out, "weights", l.weights.flat());
        put_block(out, "bias", l.bias.flat());
        switch (a.kind()) {
        case ActivationKind::ModReLU: put_block(out, "modrelu_bias", std::span<const double>(p.modrelu_bias)); break;
        case ActivationKind::SplitKAF:
            out << "gamma";
            put(out, p.gamma);
            out << '\n';
            put_block(out, "alpha_re", p.alpha_re.flat());
            put_block(out, "alpha_im", p.alpha_im.flat());
            break;
        case ActivationKind::ComplexKAF:
            out << "gamma";
            put(out, p.gamma);
            out << '\n';
            put_block(out, "alpha", p.alpha.flat());
            break;
        default: break;
        }
    }
    out << "end\n";
    if (!out) throw CheckpointError("checkpoint: write failed");
}

Network load_network(std::istream& in) {
    Reader r(in);
    r.expect("cvkaf-network");
    const std::size_t version = r.count();
    if (version != static_cast<std::size_t>(kCheckpointVersion))
        throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));

    Network net;
    r.expect("input_dim");
    net.input_dim = r.count();
    r.expect("head");
    net.head = parse_head(r.word());
    r.expect("real_valued");
    net.real_valued = r.count() != 0;

    std::shared_ptr<const KernelDictionary> dict;
    r.expect("dictionary");
    const std::string dkind = r.word();
    if (dkind != "none") {
        if (dkind != "1d" && dkind != "2d") throw CheckpointError("checkpoint: bad dictionary kind '" + dkind + "'");
        const std::size_t size = r.count();
        const double lo = r.number();
        const double hi = r.number();
        try {
            const int n = static_cast<int>(size);
            dict = std::make_shared<KernelDictionary>(dkind == "1d" ? build_dictionary_1d(n, lo, hi)
                                                                    : build_dictionary_2d(n, lo, hi));
        } catch (const std::invalid_argument& e) {
            throw CheckpointError(std::string("checkpoint: ") + e.what());
        }
    }

    r.expect("layers");
    const std::size_t nl = r.count();
    Rng unused(0);
    for (std::size_t i = 0; i < nl; ++i) {
        r.expect("layer");
        const std::size_t out = r.count(), inputs = r.count();
        ActivationKind kind;
        KernelKind kernel;
        try {
            kind = parse_activation_kind(r.word());
            kernel = parse_kernel_kind(r.word());
        } catch (const std::invalid_argument& e) {
            throw CheckpointError(std::string("checkpoint: ") + e.what());
        }
        Layer layer;
        layer.weights = ComplexTensor({out, inputs});
        layer.bias = ComplexTensor({out});
        r.fill("weights", layer.weights.flat());
        r.fill("bias", layer.bias.flat());
        const bool kaf = kind == ActivationKind::SplitKAF || kind == ActivationKind::ComplexKAF;
        if (kaf && !dict) throw CheckpointError("checkpoint: kernel activation without a dictionary");
        try {
            layer.activation = Activation::make(kind, out, dict, kernel, unused, {});
        } catch (const std::invalid_argument& e) {
            throw CheckpointError(std::string("checkpoint: ") + e.what());
        }
        ActivationParams& p = layer.activation.params();
        if (kind == ActivationKind::ModReLU) r.fill("modrelu_bias", std::span<double>(p.modrelu_bias));
        if (kaf) {
            r.expect("gamma");
            p.gamma = r.number();
        }
        if (kind == ActivationKind::SplitKAF) {
            r.fill("alpha_re", p.alpha_re.flat());
            r.fill("alpha_im", p.alpha_im.flat());
        }
        if (kind == ActivationKind::ComplexKAF) r.fill("alpha", p.alpha.flat());
        net.layers.push_back(std::move(layer));
    }
    r.expect("end");
    try {
        validate(net);
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("checkpoint: ") + e.what());
    }
    return net;
}

void save_network(const std::string& path, const Network& net) {
    std::ofstream f(path);
    if (!f) throw CheckpointError("checkpoint: cannot write " + path);
    save_network(f, net);
}

Network load_network(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw CheckpointError("checkpoint: cannot open " + path);
    return load_network(f);
}

} // namespace cvkaf
