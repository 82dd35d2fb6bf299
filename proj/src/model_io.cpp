#include "hfn/model_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hfn {

std::string Diagnostic::to_text() const {
    std::ostringstream os;
    os << "line " << line << ", col " << col << ": " << message;
    return os.str();
}

namespace {

struct Token {
    std::string text;
    int line = 0;
    int col = 0;
    bool quoted = false;
};

struct Statement {
    std::vector<Token> tokens;
    std::vector<Statement> children;
    int line = 0;
};

// Shortest decimal form that parses back to the same double; the canonical
// number format of the file formats.
std::string fmt_num(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + s.size();
}

void tokenize_line(const std::string& text, int line_no, std::vector<Token>& out,
                   std::vector<Diagnostic>& diags) {
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        if (text[i] == '#') break;
        int col = static_cast<int>(i) + 1;
        if (text[i] == '"') {
            size_t j = i + 1;
            std::string value;
            while (j < n && text[j] != '"') value.push_back(text[j++]);
            if (j == n) {
                diags.push_back({line_no, col, "unterminated string"});
                return;
            }
            out.push_back({value, line_no, col, true});
            i = j + 1;
        } else if (text[i] == '{' || text[i] == '}') {
            out.push_back({std::string(1, text[i]), line_no, col, false});
            ++i;
        } else {
            size_t j = i;
            while (j < n && !std::isspace(static_cast<unsigned char>(text[j])) &&
                   text[j] != '#' && text[j] != '{' && text[j] != '}')
                ++j;
            out.push_back({text.substr(i, j - i), line_no, col, false});
            i = j;
        }
    }
}

std::vector<Statement> parse_statements(const std::string& text,
                                        std::vector<Diagnostic>& diags) {
    std::vector<Statement> top;
    Statement* open_block = nullptr;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::vector<Token> tokens;
        tokenize_line(line, line_no, tokens, diags);
        if (tokens.empty()) continue;
        bool opens = tokens.back().text == "{" && !tokens.back().quoted;
        if (opens) tokens.pop_back();
        bool closes = tokens.size() == 1 && tokens[0].text == "}" && !tokens[0].quoted;
        if (closes) {
            if (!open_block)
                diags.push_back({line_no, tokens[0].col, "'}' without an open block"});
            open_block = nullptr;
            continue;
        }
        Statement st;
        st.tokens = std::move(tokens);
        st.line = line_no;
        if (open_block) {
            if (opens) {
                diags.push_back({line_no, 1, "nested blocks are not supported"});
                continue;
            }
            open_block->children.push_back(std::move(st));
        } else {
            top.push_back(std::move(st));
            if (opens) open_block = &top.back();
        }
    }
    if (open_block)
        diags.push_back({open_block->line, 1, "block is never closed with '}'"});
    return top;
}

// Sequential reader over one statement's tokens. The first error marks the
// cursor failed; later reads return defaults so a statement yields one
// diagnostic, not a cascade.
class Cursor {
public:
    Cursor(const Statement& st, std::vector<Diagnostic>& diags)
        : st_(st), diags_(diags) {}

    bool failed() const { return failed_; }

    const Token* next(const std::string& what) {
        if (failed_) return nullptr;
        if (i_ >= st_.tokens.size()) {
            fail(st_.line, last_col(), "expected " + what + " before end of line");
            return nullptr;
        }
        return &st_.tokens[i_++];
    }
    bool keyword(const std::string& kw) {
        const Token* t = next("'" + kw + "'");
        if (!t) return false;
        if (t->quoted || t->text != kw) {
            fail(t->line, t->col, "expected '" + kw + "', found '" + t->text + "'");
            return false;
        }
        return true;
    }
    // True when the next token is the given bare word; does not consume.
    bool peek(const std::string& kw) const {
        return !failed_ && i_ < st_.tokens.size() && !st_.tokens[i_].quoted &&
               st_.tokens[i_].text == kw;
    }
    bool at_end() const { return failed_ || i_ >= st_.tokens.size(); }
    Token ident(const std::string& what) {
        const Token* t = next(what);
        if (!t) return {};
        if (t->quoted) {
            fail(t->line, t->col, what + " must be a bare identifier");
            return {};
        }
        return *t;
    }
    std::string quoted(const std::string& what) {
        const Token* t = next(what);
        if (!t) return {};
        if (!t->quoted) {
            fail(t->line, t->col, what + " must be a quoted string");
            return {};
        }
        return t->text;
    }
    double number(const std::string& what) {
        const Token* t = next(what);
        double v = 0.0;
        if (!t) return v;
        if (t->quoted || !parse_number(t->text, v))
            fail(t->line, t->col, what + " must be a number, found '" + t->text + "'");
        return v;
    }
    int integer(const std::string& what) {
        const Token* t = next(what);
        if (!t) return 0;
        double v = 0.0;
        if (t->quoted || !parse_number(t->text, v) || v != static_cast<int>(v)) {
            fail(t->line, t->col, what + " must be an integer, found '" + t->text + "'");
            return 0;
        }
        return static_cast<int>(v);
    }
    void finish() {
        if (failed_ || i_ >= st_.tokens.size()) return;
        const Token& t = st_.tokens[i_];
        fail(t.line, t.col, "unexpected trailing token '" + t.text + "'");
    }

private:
    int last_col() const {
        if (st_.tokens.empty()) return 1;
        const Token& t = st_.tokens.back();
        return t.col + static_cast<int>(t.text.size());
    }
    void fail(int line, int col, const std::string& msg) {
        if (!failed_) diags_.push_back({line, col, msg});
        failed_ = true;
    }

    const Statement& st_;
    std::vector<Diagnostic>& diags_;
    size_t i_ = 0;
    bool failed_ = false;
};

// --- syntax-level declarations (pass 1) ------------------------------------

struct DeviceRatio {
    Token operand;
    double ratio = 0.0;
    bool out = false;
};
struct DeviceDecl {
    Token process;
    std::vector<DeviceRatio> ratios;
};
enum class CapForm { Process, Move, Store };
struct CapDecl {
    Token id;
    CapForm form = CapForm::Process;
    Token process; // Process form
    Token operand; // Move and Store forms
    Token from, to, via, at;
    int duration = 0;
    double capacity = 0, cost = 0, qcost = 0;
    bool has_qcost = false;
};
struct InitialDecl {
    Token operand, resource;
    double value = 0.0;
};
struct PlaceDecl {
    Token id;
    double initial = 0.0;
};
struct TransDecl {
    Token id;
    std::vector<Token> pulls, pushes, minus, plus;
};
struct ServiceDecl {
    Token operand;
    std::vector<PlaceDecl> places;
    std::vector<TransDecl> transitions;
};

struct ModelSyntax {
    std::vector<Operand> operands;
    std::vector<Token> operand_tokens;
    std::vector<Resource> resources;
    std::vector<Token> resource_tokens;
    std::vector<Process> processes;
    std::vector<Token> process_tokens;
    std::vector<Token> transport_operands;
    std::vector<DeviceDecl> devices;
    std::vector<CapDecl> capabilities;
    std::vector<InitialDecl> initials;
    std::vector<ServiceDecl> services;
};

void parse_capability_tail(Cursor& c, CapDecl& d) {
    if (!c.keyword("duration")) return;
    d.duration = c.integer("duration");
    if (!c.keyword("capacity")) return;
    d.capacity = c.number("capacity");
    if (!c.keyword("cost")) return;
    d.cost = c.number("cost");
    if (c.peek("qcost")) {
        c.keyword("qcost");
        d.qcost = c.number("qcost");
        d.has_qcost = true;
    }
    c.finish();
}

void parse_model_statement(const Statement& st, ModelSyntax& out,
                           std::vector<Diagnostic>& diags) {
    const std::string& kw = st.tokens[0].text;
    Cursor c(st, diags);
    if (kw == "operand") {
        c.keyword("operand");
        Operand op;
        Token id = c.ident("operand id");
        op.id = id.text;
        op.name = c.quoted("operand name");
        c.keyword("unit");
        op.unit = c.ident("unit").text;
        c.finish();
        if (!c.failed()) {
            out.operands.push_back(std::move(op));
            out.operand_tokens.push_back(id);
        }
    } else if (kw == "resource") {
        c.keyword("resource");
        Resource r;
        Token id = c.ident("resource id");
        r.id = id.text;
        r.name = c.quoted("resource name");
        Token kind = c.ident("resource kind");
        if (!c.failed()) {
            if (kind.text == "transformation") r.kind = ResourceKind::Transformation;
            else if (kind.text == "buffer") r.kind = ResourceKind::IndependentBuffer;
            else if (kind.text == "transport") r.kind = ResourceKind::Transportation;
            else {
                diags.push_back({kind.line, kind.col,
                                 "resource kind must be transformation, buffer or "
                                 "transport, found '" +
                                     kind.text + "'"});
                return;
            }
        }
        if (c.peek("node")) {
            c.keyword("node");
            r.node = c.integer("node");
        }
        c.finish();
        if (!c.failed()) {
            out.resources.push_back(std::move(r));
            out.resource_tokens.push_back(id);
        }
    } else if (kw == "process") {
        c.keyword("process");
        Process p;
        Token id = c.ident("process id");
        p.id = id.text;
        p.name = c.quoted("process name");
        c.finish();
        if (!c.failed()) {
            out.processes.push_back(std::move(p));
            out.process_tokens.push_back(id);
        }
    } else if (kw == "transport-operand") {
        c.keyword("transport-operand");
        Token id = c.ident("operand id");
        c.finish();
        if (!c.failed()) out.transport_operands.push_back(id);
    } else if (kw == "device") {
        c.keyword("device");
        DeviceDecl d;
        d.process = c.ident("process id");
        while (!c.at_end()) {
            DeviceRatio r;
            if (c.peek("in")) {
                c.keyword("in");
                r.out = false;
            } else if (c.peek("out")) {
                c.keyword("out");
                r.out = true;
            } else {
                c.keyword("in or out");
                break;
            }
            r.operand = c.ident("operand id");
            r.ratio = c.number("ratio");
            if (!c.failed()) d.ratios.push_back(std::move(r));
        }
        if (!c.failed()) out.devices.push_back(std::move(d));
    } else if (kw == "capability") {
        c.keyword("capability");
        CapDecl d;
        d.id = c.ident("capability id");
        if (c.peek("process")) {
            c.keyword("process");
            d.form = CapForm::Process;
            d.process = c.ident("process id");
            c.keyword("at");
            d.at = c.ident("resource id");
        } else if (c.peek("move")) {
            c.keyword("move");
            d.form = CapForm::Move;
            d.operand = c.ident("operand id");
            c.keyword("from");
            d.from = c.ident("resource id");
            c.keyword("to");
            d.to = c.ident("resource id");
            c.keyword("via");
            d.via = c.ident("resource id");
        } else if (c.peek("store")) {
            c.keyword("store");
            d.form = CapForm::Store;
            d.operand = c.ident("operand id");
            c.keyword("at");
            d.at = c.ident("resource id");
        } else {
            c.keyword("process, move or store");
            return;
        }
        parse_capability_tail(c, d);
        if (!c.failed()) out.capabilities.push_back(std::move(d));
    } else if (kw == "initial") {
        c.keyword("initial");
        InitialDecl d;
        d.operand = c.ident("operand id");
        c.keyword("at");
        d.resource = c.ident("resource id");
        d.value = c.number("amount");
        c.finish();
        if (!c.failed()) out.initials.push_back(std::move(d));
    } else if (kw == "service") {
        c.keyword("service");
        ServiceDecl d;
        d.operand = c.ident("operand id");
        c.finish();
        if (c.failed()) return;
        for (const Statement& sub : st.children) {
            Cursor sc(sub, diags);
            if (sub.tokens[0].text == "place") {
                sc.keyword("place");
                PlaceDecl p;
                p.id = sc.ident("place id");
                if (sc.peek("initial")) {
                    sc.keyword("initial");
                    p.initial = sc.number("initial marking");
                }
                sc.finish();
                if (!sc.failed()) d.places.push_back(std::move(p));
            } else if (sub.tokens[0].text == "transition") {
                sc.keyword("transition");
                TransDecl t;
                t.id = sc.ident("transition id");
                while (!sc.at_end()) {
                    if (sc.peek("pull")) {
                        sc.keyword("pull");
                        t.pulls.push_back(sc.ident("place id"));
                    } else if (sc.peek("push")) {
                        sc.keyword("push");
                        t.pushes.push_back(sc.ident("place id"));
                    } else if (sc.peek("minus")) {
                        sc.keyword("minus");
                        while (!sc.at_end() && !sc.peek("plus") && !sc.peek("minus") &&
                               !sc.peek("pull") && !sc.peek("push"))
                            t.minus.push_back(sc.ident("capability id"));
                    } else if (sc.peek("plus")) {
                        sc.keyword("plus");
                        while (!sc.at_end() && !sc.peek("plus") && !sc.peek("minus") &&
                               !sc.peek("pull") && !sc.peek("push"))
                            t.plus.push_back(sc.ident("capability id"));
                    } else {
                        sc.keyword("pull, push, minus or plus");
                        break;
                    }
                }
                if (!sc.failed()) d.transitions.push_back(std::move(t));
            } else {
                diags.push_back({sub.tokens[0].line, sub.tokens[0].col,
                                 "expected 'place' or 'transition', found '" +
                                     sub.tokens[0].text + "'"});
            }
        }
        out.services.push_back(std::move(d));
    } else {
        diags.push_back(
            {st.tokens[0].line, st.tokens[0].col, "unknown statement '" + kw + "'"});
    }
}

// --- lowering (pass 2) ------------------------------------------------------

class SymbolTable {
public:
    bool declare(const Token& tok, const std::string& kind,
                 std::vector<Diagnostic>& diags) {
        auto [it, inserted] = ix_.emplace(tok.text, static_cast<int>(ix_.size()));
        if (!inserted)
            diags.push_back({tok.line, tok.col, "duplicate " + kind + " '" + tok.text + "'"});
        return inserted;
    }
    int find(const Token& tok, const std::string& kind,
             std::vector<Diagnostic>& diags) const {
        auto it = ix_.find(tok.text);
        if (it == ix_.end()) {
            diags.push_back({tok.line, tok.col, "unknown " + kind + " '" + tok.text + "'"});
            return -1;
        }
        return it->second;
    }
    int lookup(const std::string& id) const {
        auto it = ix_.find(id);
        return it == ix_.end() ? -1 : it->second;
    }

private:
    std::map<std::string, int> ix_;
};

std::optional<SystemModel> lower_model(const ModelSyntax& syn,
                                       std::vector<Diagnostic>& diags) {
    const size_t before = diags.size();
    SystemModel m;
    m.operands = syn.operands;
    m.resources = syn.resources;
    m.processes = syn.processes;

    SymbolTable operands, resources, processes;
    for (const Token& t : syn.operand_tokens) operands.declare(t, "operand", diags);
    for (const Token& t : syn.resource_tokens) resources.declare(t, "resource", diags);
    for (const Token& t : syn.process_tokens) processes.declare(t, "process", diags);

    std::vector<int> transport_g; // operand index per transport grid
    for (const Token& t : syn.transport_operands) {
        int ix = operands.find(t, "operand", diags);
        if (ix >= 0) {
            if (std::find(transport_g.begin(), transport_g.end(), ix) !=
                transport_g.end())
                diags.push_back(
                    {t.line, t.col, "duplicate transport-operand '" + t.text + "'"});
            else {
                transport_g.push_back(ix);
                m.transport_operands.push_back(t.text);
            }
        }
    }

    m.buffers = classify_buffers(m.resources);
    m.buffer_index.assign(m.resources.size(), -1);
    for (int i = 0; i < static_cast<int>(m.buffers.size()); ++i)
        m.buffer_index[m.buffers[i]] = i;

    m.process_space.transformation_count = static_cast<int>(m.processes.size());
    m.process_space.transport_operand_count = static_cast<int>(transport_g.size());
    m.process_space.buffer_count = static_cast<int>(m.buffers.size());
    const int nl = m.operand_count();
    const int nb = m.buffer_count();

    // device ratios, keyed by transformation process
    std::map<int, std::map<int, double>> dev_in, dev_out; // process -> operand -> ratio
    std::set<int> has_device;
    for (const DeviceDecl& d : syn.devices) {
        int p = processes.find(d.process, "process", diags);
        if (p < 0) continue;
        if (!has_device.insert(p).second) {
            diags.push_back({d.process.line, d.process.col,
                             "duplicate device model for process '" + d.process.text +
                                 "'"});
            continue;
        }
        for (const DeviceRatio& r : d.ratios) {
            int op = operands.find(r.operand, "operand", diags);
            if (op < 0) continue;
            auto& side = r.out ? dev_out[p] : dev_in[p];
            if (!side.emplace(op, r.ratio).second)
                diags.push_back({r.operand.line, r.operand.col,
                                 "duplicate ratio for operand '" + r.operand.text +
                                     "' in device model"});
            if (r.ratio <= 0.0)
                diags.push_back({r.operand.line, r.operand.col,
                                 "device ratio must be positive"});
        }
    }

    // capabilities
    auto buffer_of = [&](const Token& tok) -> int {
        int r = resources.find(tok, "resource", diags);
        if (r < 0) return -1;
        if (m.buffer_index[r] < 0) {
            diags.push_back({tok.line, tok.col,
                             "resource '" + tok.text + "' is not a buffer"});
            return -1;
        }
        return m.buffer_index[r];
    };
    auto transport_index = [&](const Token& tok) -> int {
        int op = operands.find(tok, "operand", diags);
        if (op < 0) return -1;
        for (int g = 0; g < static_cast<int>(transport_g.size()); ++g)
            if (transport_g[g] == op) return g;
        diags.push_back({tok.line, tok.col,
                         "operand '" + tok.text + "' has no transport grid; "
                         "declare it with transport-operand"});
        return -1;
    };

    std::vector<Capability> caps;
    std::set<std::string> cap_ids;
    std::set<std::pair<int, int>> cells;
    for (const CapDecl& d : syn.capabilities) {
        if (!cap_ids.insert(d.id.text).second) {
            diags.push_back(
                {d.id.line, d.id.col, "duplicate capability '" + d.id.text + "'"});
            continue;
        }
        Capability cap;
        cap.id = d.id.text;
        cap.duration = d.duration;
        cap.capacity = d.capacity;
        cap.linear_cost = d.cost;
        cap.quadratic_cost = d.qcost;
        if (d.duration < 0)
            diags.push_back({d.id.line, d.id.col, "duration must be non-negative"});
        if (d.capacity < 0 || d.cost < 0 || d.qcost < 0)
            diags.push_back(
                {d.id.line, d.id.col, "capacity and costs must be non-negative"});

        if (d.form == CapForm::Process) {
            int p = processes.find(d.process, "process", diags);
            int y = buffer_of(d.at);
            if (p < 0 || y < 0) continue;
            cap.process_row = m.process_space.transformation_row(p);
            cap.resource = m.buffers[y];
            if (!has_device.count(p)) {
                diags.push_back({d.process.line, d.process.col,
                                 "process '" + d.process.text +
                                     "' has no device model; flows are unknown"});
                continue;
            }
            for (const auto& [op, ratio] : dev_in[p]) cap.pulls.push_back({op, y});
            for (const auto& [op, ratio] : dev_out[p]) cap.pushes.push_back({op, y});
        } else if (d.form == CapForm::Move) {
            int g = transport_index(d.operand);
            int o = buffer_of(d.from);
            int dd = buffer_of(d.to);
            int via = resources.find(d.via, "resource", diags);
            if (g < 0 || o < 0 || dd < 0 || via < 0) continue;
            if (m.resources[via].kind != ResourceKind::Transportation)
                diags.push_back({d.via.line, d.via.col,
                                 "resource '" + d.via.text + "' is not a transport "
                                 "resource"});
            cap.process_row = m.process_space.transport_row(g, o, dd);
            cap.resource = via;
            int op = transport_g[g];
            cap.pulls.push_back({op, o});
            cap.pushes.push_back({op, dd});
        } else {
            int g = transport_index(d.operand);
            int y = buffer_of(d.at);
            if (g < 0 || y < 0) continue;
            cap.process_row = m.process_space.transport_row(g, y, y);
            cap.resource = m.buffers[y];
            int op = transport_g[g];
            cap.pulls.push_back({op, y});
            cap.pushes.push_back({op, y});
        }
        if (!cells.emplace(cap.process_row, cap.resource).second) {
            diags.push_back({d.id.line, d.id.col,
                             "capability '" + d.id.text +
                                 "' duplicates an already used process-resource cell"});
            continue;
        }
        caps.push_back(std::move(cap));
    }

    if (diags.size() != before) return std::nullopt;

    // concept matrix and canonical capability order
    m.system_concept.rows = m.process_space.rows();
    m.system_concept.cols = static_cast<int>(m.resources.size());
    std::vector<Triplet> trip;
    for (const Capability& c : caps) trip.emplace_back(c.process_row, c.resource, 1.0);
    m.system_concept.a_s.resize(m.system_concept.rows, m.system_concept.cols);
    m.system_concept.a_s.setFromTriplets(trip.begin(), trip.end());
    m.capabilities = enumerate_capabilities(m.system_concept, std::move(caps));
    m.pmap.process_row_of.clear();
    for (const Capability& c : m.capabilities)
        m.pmap.process_row_of.push_back(c.process_row);

    SymbolTable capability_ix;
    for (const Capability& c : m.capabilities) {
        Token t{c.id, 0, 0, false};
        capability_ix.declare(t, "capability", diags);
    }

    // device matrices: declared ratios on transformation rows, unit ratios on
    // every transport grid row
    std::vector<Triplet> dplus, dminus;
    for (const auto& [p, side] : dev_out)
        for (const auto& [op, ratio] : side)
            dplus.emplace_back(op, m.process_space.transformation_row(p), ratio);
    for (const auto& [p, side] : dev_in)
        for (const auto& [op, ratio] : side)
            dminus.emplace_back(op, m.process_space.transformation_row(p), ratio);
    for (int g = 0; g < static_cast<int>(transport_g.size()); ++g)
        for (int o = 0; o < nb; ++o)
            for (int d2 = 0; d2 < nb; ++d2) {
                int row = m.process_space.transport_row(g, o, d2);
                dplus.emplace_back(transport_g[g], row, 1.0);
                dminus.emplace_back(transport_g[g], row, 1.0);
            }
    m.device_plus.resize(nl, m.process_space.rows());
    m.device_plus.setFromTriplets(dplus.begin(), dplus.end());
    m.device_minus.resize(nl, m.process_space.rows());
    m.device_minus.setFromTriplets(dminus.begin(), dminus.end());

    // initial stock
    m.initial_stock = Vec::Zero(nl * nb);
    std::set<std::pair<int, int>> seen_init;
    for (const InitialDecl& d : syn.initials) {
        int op = operands.find(d.operand, "operand", diags);
        int y = buffer_of(d.resource);
        if (op < 0 || y < 0) continue;
        if (!seen_init.emplace(op, y).second) {
            diags.push_back({d.operand.line, d.operand.col,
                             "duplicate initial stock for this operand and buffer"});
            continue;
        }
        if (d.value < 0)
            diags.push_back(
                {d.operand.line, d.operand.col, "initial stock must be non-negative"});
        m.initial_stock(op * nb + y) = d.value;
    }

    // service nets
    std::vector<std::optional<ServiceNetDecl>> nets(nl);
    for (const ServiceDecl& d : syn.services) {
        int op = operands.find(d.operand, "operand", diags);
        if (op < 0) continue;
        if (nets[op]) {
            diags.push_back({d.operand.line, d.operand.col,
                             "operand '" + d.operand.text +
                                 "' already has a service net"});
            continue;
        }
        ServiceNetDecl net;
        net.operand = op;
        SymbolTable places;
        net.initial_marking = Vec::Zero(static_cast<int>(d.places.size()));
        for (int i = 0; i < static_cast<int>(d.places.size()); ++i) {
            const PlaceDecl& p = d.places[i];
            if (!places.declare(p.id, "place", diags)) continue;
            net.place_ids.push_back(p.id.text);
            if (p.initial < 0)
                diags.push_back(
                    {p.id.line, p.id.col, "initial marking must be non-negative"});
            net.initial_marking(i) = p.initial;
        }
        SymbolTable transitions;
        for (const TransDecl& t : d.transitions) {
            if (!transitions.declare(t.id, "transition", diags)) continue;
            net.transition_ids.push_back(t.id.text);
            std::vector<int> pulls, pushes, minus, plus;
            for (const Token& tok : t.pulls) {
                int p = places.find(tok, "place", diags);
                if (p >= 0) pulls.push_back(p);
            }
            for (const Token& tok : t.pushes) {
                int p = places.find(tok, "place", diags);
                if (p >= 0) pushes.push_back(p);
            }
            for (const Token& tok : t.minus) {
                int cix = capability_ix.find(tok, "capability", diags);
                if (cix >= 0) minus.push_back(cix);
            }
            for (const Token& tok : t.plus) {
                int cix = capability_ix.find(tok, "capability", diags);
                if (cix >= 0) plus.push_back(cix);
            }
            net.pull_places.push_back(std::move(pulls));
            net.push_places.push_back(std::move(pushes));
            net.realizes_minus.push_back(std::move(minus));
            net.realizes_plus.push_back(std::move(plus));
        }
        nets[op] = std::move(net);
    }
    for (int i = 0; i < nl; ++i) {
        if (!nets[i]) {
            diags.push_back({0, 0, "operand '" + m.operands[i].id +
                                       "' has no service net"});
            continue;
        }
        m.service_nets.push_back(std::move(*nets[i]));
    }

    if (diags.size() != before) return std::nullopt;

    // every operand a capability touches must be tracked by that operand's
    // service net with the matching sign, or the synchronization rows would
    // silently pin the capability to zero
    std::vector<std::set<int>> realized_minus(nl), realized_plus(nl);
    for (const ServiceNetDecl& net : m.service_nets) {
        for (const auto& list : net.realizes_minus)
            realized_minus[net.operand].insert(list.begin(), list.end());
        for (const auto& list : net.realizes_plus)
            realized_plus[net.operand].insert(list.begin(), list.end());
    }
    for (int psi = 0; psi < m.capability_count(); ++psi) {
        const Capability& c = m.capabilities[psi];
        for (const CapabilityFlow& fl : c.pulls)
            if (!realized_minus[fl.operand].count(psi))
                diags.push_back({0, 0, "capability '" + c.id + "' consumes operand '" +
                                           m.operands[fl.operand].id +
                                           "' but no service transition realizes it "
                                           "(minus)"});
        for (const CapabilityFlow& fl : c.pushes)
            if (!realized_plus[fl.operand].count(psi))
                diags.push_back({0, 0, "capability '" + c.id + "' produces operand '" +
                                           m.operands[fl.operand].id +
                                           "' but no service transition realizes it "
                                           "(plus)"});
    }
    // and the converse: a realized capability must actually move the operand
    for (const ServiceNetDecl& net : m.service_nets) {
        for (const auto& list : net.realizes_minus)
            for (int psi : list) {
                const Capability& c = m.capabilities[psi];
                bool touches = std::any_of(
                    c.pulls.begin(), c.pulls.end(),
                    [&](const CapabilityFlow& fl) { return fl.operand == net.operand; });
                if (!touches)
                    diags.push_back({0, 0, "service net of operand '" +
                                               m.operands[net.operand].id +
                                               "' realizes capability '" + c.id +
                                               "' (minus) which does not consume it"});
            }
        for (const auto& list : net.realizes_plus)
            for (int psi : list) {
                const Capability& c = m.capabilities[psi];
                bool touches = std::any_of(
                    c.pushes.begin(), c.pushes.end(),
                    [&](const CapabilityFlow& fl) { return fl.operand == net.operand; });
                if (!touches)
                    diags.push_back({0, 0, "service net of operand '" +
                                               m.operands[net.operand].id +
                                               "' realizes capability '" + c.id +
                                               "' (plus) which does not produce it"});
            }
    }

    if (diags.size() != before) return std::nullopt;
    return m;
}

} // namespace

ParsedModel parse_model(const std::string& text) {
    ParsedModel out;
    std::vector<Statement> statements = parse_statements(text, out.diagnostics);
    if (statements.empty()) {
        out.diagnostics.push_back({0, 0, "empty document; expected 'hfn-model v1'"});
        return out;
    }
    const Statement& header = statements.front();
    if (header.tokens.size() != 2 || header.tokens[0].text != "hfn-model" ||
        header.tokens[1].text != "v1") {
        out.diagnostics.push_back({header.line, header.tokens[0].col,
                                   "expected header 'hfn-model v1'"});
        return out;
    }
    ModelSyntax syn;
    for (size_t i = 1; i < statements.size(); ++i)
        parse_model_statement(statements[i], syn, out.diagnostics);
    if (!out.diagnostics.empty()) return out;
    out.model = lower_model(syn, out.diagnostics);
    return out;
}

ParsedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        ParsedModel out;
        out.diagnostics.push_back({0, 0, "cannot open '" + path + "'"});
        return out;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

namespace {

struct ScenarioSyntax {
    Token id;
    std::string name;
    int horizon = -1;
    Token horizon_tok;
    struct PinDecl {
        Token capability;
        bool supply = false;
        bool is_series = false;
        int day_from = 0, day_to = 0;
        double value = 0.0;
        std::vector<double> series;
    };
    std::vector<PinDecl> pins;
    struct PriceDecl {
        Token operand;
        Token resource; // text "all" when global
        bool all = false;
        double add = 0.0;
    };
    std::vector<PriceDecl> prices;
    bool zero_initial = false;
    double epsilon = 1e-9;
};

std::optional<ScenarioSpec> lower_scenario(const ScenarioSyntax& syn,
                                           const SystemModel& model,
                                           std::vector<Diagnostic>& diags) {
    const size_t before = diags.size();
    ScenarioSpec spec;
    spec.id = syn.id.text;
    spec.zero_initial = syn.zero_initial;
    spec.epsilon = syn.epsilon;
    if (syn.horizon <= 0) {
        diags.push_back({syn.horizon_tok.line, syn.horizon_tok.col,
                         "scenario needs a positive horizon"});
        return std::nullopt;
    }
    spec.K = syn.horizon;

    std::set<std::pair<int, bool>> seen;
    for (const auto& pin : syn.pins) {
        int cap = model.find_capability(pin.capability.text);
        if (cap < 0) {
            diags.push_back({pin.capability.line, pin.capability.col,
                             "unknown capability '" + pin.capability.text + "'"});
            continue;
        }
        if (!seen.emplace(cap, pin.supply).second) {
            diags.push_back({pin.capability.line, pin.capability.col,
                             "capability '" + pin.capability.text +
                                 "' is already pinned on this side"});
            continue;
        }
        BoundaryData::Pin p;
        p.capability = cap;
        p.series = Vec::Zero(spec.K);
        if (pin.is_series) {
            if (static_cast<int>(pin.series.size()) != spec.K) {
                diags.push_back({pin.capability.line, pin.capability.col,
                                 "series needs exactly " + std::to_string(spec.K) +
                                     " values, found " +
                                     std::to_string(pin.series.size())});
                continue;
            }
            for (int t = 0; t < spec.K; ++t) p.series(t) = pin.series[t];
        } else {
            if (pin.day_from < 1 || pin.day_to > spec.K || pin.day_from > pin.day_to) {
                diags.push_back({pin.capability.line, pin.capability.col,
                                 "days must satisfy 1 <= from <= to <= horizon"});
                continue;
            }
            for (int d = pin.day_from; d <= pin.day_to; ++d)
                p.series(d - 1) = pin.value;
        }
        for (int t = 0; t < spec.K; ++t)
            if (p.series(t) < 0) {
                diags.push_back({pin.capability.line, pin.capability.col,
                                 "pinned values must be non-negative"});
                break;
            }
        if (pin.supply) spec.supplies.push_back(std::move(p));
        else spec.demands.push_back(std::move(p));
    }

    for (const auto& price : syn.prices) {
        int op = model.find_operand(price.operand.text);
        if (op < 0) {
            diags.push_back({price.operand.line, price.operand.col,
                             "unknown operand '" + price.operand.text + "'"});
            continue;
        }
        int res = -1;
        if (!price.all) {
            res = model.find_resource(price.resource.text);
            if (res < 0) {
                diags.push_back({price.resource.line, price.resource.col,
                                 "unknown resource '" + price.resource.text + "'"});
                continue;
            }
        }
        int matched = 0;
        for (int psi = 0; psi < model.capability_count(); ++psi) {
            const Capability& c = model.capabilities[psi];
            if (!c.pushes.empty() || c.pulls.empty()) continue;
            bool pulls_op = std::all_of(
                c.pulls.begin(), c.pulls.end(),
                [&](const CapabilityFlow& fl) { return fl.operand == op; });
            if (!pulls_op) continue;
            if (!price.all && c.resource != res) continue;
            spec.cost_adders.emplace_back(psi, price.add);
            ++matched;
        }
        if (matched == 0)
            diags.push_back({price.operand.line, price.operand.col,
                             "no export capability of operand '" + price.operand.text +
                                 "' matches this price statement"});
    }

    if (diags.size() != before) return std::nullopt;
    return spec;
}

} // namespace

ParsedScenario parse_scenario(const std::string& text, const SystemModel& model) {
    ParsedScenario out;
    std::vector<Statement> statements = parse_statements(text, out.diagnostics);
    if (statements.empty()) {
        out.diagnostics.push_back({0, 0, "empty document; expected 'hfn-scenario v1'"});
        return out;
    }
    const Statement& header = statements.front();
    if (header.tokens.size() != 2 || header.tokens[0].text != "hfn-scenario" ||
        header.tokens[1].text != "v1") {
        out.diagnostics.push_back({header.line, header.tokens[0].col,
                                   "expected header 'hfn-scenario v1'"});
        return out;
    }
    ScenarioSyntax syn;
    bool have_id = false;
    for (size_t i = 1; i < statements.size(); ++i) {
        const Statement& st = statements[i];
        const std::string& kw = st.tokens[0].text;
        Cursor c(st, out.diagnostics);
        if (kw == "scenario") {
            c.keyword("scenario");
            syn.id = c.ident("scenario id");
            syn.name = c.quoted("scenario name");
            c.finish();
            have_id = !c.failed();
        } else if (kw == "horizon") {
            c.keyword("horizon");
            syn.horizon_tok = st.tokens[0];
            syn.horizon = c.integer("horizon");
            c.finish();
        } else if (kw == "demand" || kw == "supply") {
            c.keyword(kw);
            ScenarioSyntax::PinDecl pin;
            pin.supply = kw == "supply";
            pin.capability = c.ident("capability id");
            if (c.peek("days")) {
                c.keyword("days");
                pin.day_from = c.integer("first day");
                pin.day_to = c.integer("last day");
                c.keyword("value");
                pin.value = c.number("value");
                c.finish();
            } else if (c.peek("series")) {
                c.keyword("series");
                pin.is_series = true;
                while (!c.at_end()) pin.series.push_back(c.number("series value"));
            } else {
                c.keyword("days or series");
            }
            if (!c.failed()) syn.pins.push_back(std::move(pin));
        } else if (kw == "price-export") {
            c.keyword("price-export");
            ScenarioSyntax::PriceDecl price;
            price.operand = c.ident("operand id");
            c.keyword("at");
            price.resource = c.ident("resource id or 'all'");
            price.all = price.resource.text == "all";
            c.keyword("add");
            price.add = c.number("price");
            c.finish();
            if (!c.failed()) syn.prices.push_back(std::move(price));
        } else if (kw == "initial") {
            c.keyword("initial");
            c.keyword("zero");
            c.finish();
            if (!c.failed()) syn.zero_initial = true;
        } else if (kw == "epsilon") {
            c.keyword("epsilon");
            syn.epsilon = c.number("epsilon");
            c.finish();
        } else {
            out.diagnostics.push_back(
                {st.tokens[0].line, st.tokens[0].col, "unknown statement '" + kw + "'"});
        }
    }
    if (!have_id && out.diagnostics.empty())
        out.diagnostics.push_back({0, 0, "missing 'scenario <id> \"<name>\"' statement"});
    if (!out.diagnostics.empty()) return out;
    out.scenario = lower_scenario(syn, model, out.diagnostics);
    return out;
}

ParsedScenario load_scenario(const std::string& path, const SystemModel& model) {
    std::ifstream in(path);
    if (!in) {
        ParsedScenario out;
        out.diagnostics.push_back({0, 0, "cannot open '" + path + "'"});
        return out;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), model);
}

std::string serialize_model(const SystemModel& m) {
    std::ostringstream os;
    os << "hfn-model v1\n\n";
    for (const Operand& op : m.operands)
        os << "operand " << op.id << " \"" << op.name << "\" unit " << op.unit << "\n";
    os << "\n";
    for (const Resource& r : m.resources) {
        os << "resource " << r.id << " \"" << r.name << "\" ";
        switch (r.kind) {
            case ResourceKind::Transformation: os << "transformation"; break;
            case ResourceKind::IndependentBuffer: os << "buffer"; break;
            case ResourceKind::Transportation: os << "transport"; break;
        }
        if (r.node >= 0) os << " node " << r.node;
        os << "\n";
    }
    os << "\n";
    for (const Process& p : m.processes)
        os << "process " << p.id << " \"" << p.name << "\"\n";
    for (const std::string& g : m.transport_operands)
        os << "transport-operand " << g << "\n";
    os << "\n";
    for (int p = 0; p < m.process_space.transformation_count; ++p) {
        std::ostringstream body;
        for (int op = 0; op < m.operand_count(); ++op) {
            double v = m.device_minus.coeff(op, p);
            if (v != 0.0) body << " in " << m.operands[op].id << " " << fmt_num(v);
        }
        for (int op = 0; op < m.operand_count(); ++op) {
            double v = m.device_plus.coeff(op, p);
            if (v != 0.0) body << " out " << m.operands[op].id << " " << fmt_num(v);
        }
        if (!body.str().empty())
            os << "device " << m.processes[p].id << body.str() << "\n";
    }
    os << "\n";
    for (const Capability& c : m.capabilities) {
        os << "capability " << c.id << " ";
        if (!m.process_space.is_transport_row(c.process_row)) {
            os << "process " << m.processes[c.process_row].id << " at "
               << m.resources[c.resource].id;
        } else {
            int g, o, d;
            m.process_space.split_transport_row(c.process_row, g, o, d);
            if (o == d) {
                os << "store " << m.transport_operands[g] << " at "
                   << m.resources[c.resource].id;
            } else {
                os << "move " << m.transport_operands[g] << " from "
                   << m.resources[m.buffers[o]].id << " to "
                   << m.resources[m.buffers[d]].id << " via "
                   << m.resources[c.resource].id;
            }
        }
        os << " duration " << c.duration << " capacity " << fmt_num(c.capacity)
           << " cost " << fmt_num(c.linear_cost);
        if (c.quadratic_cost != 0.0) os << " qcost " << fmt_num(c.quadratic_cost);
        os << "\n";
    }
    os << "\n";
    const int nb = m.buffer_count();
    for (int op = 0; op < m.operand_count(); ++op)
        for (int y = 0; y < nb; ++y) {
            double v = m.initial_stock(op * nb + y);
            if (v != 0.0)
                os << "initial " << m.operands[op].id << " at "
                   << m.resources[m.buffers[y]].id << " " << fmt_num(v) << "\n";
        }
    for (const ServiceNetDecl& net : m.service_nets) {
        os << "\nservice " << m.operands[net.operand].id << " {\n";
        for (int i = 0; i < static_cast<int>(net.place_ids.size()); ++i) {
            os << "  place " << net.place_ids[i];
            if (net.initial_marking(i) != 0.0)
                os << " initial " << fmt_num(net.initial_marking(i));
            os << "\n";
        }
        for (int t = 0; t < static_cast<int>(net.transition_ids.size()); ++t) {
            os << "  transition " << net.transition_ids[t];
            for (int p : net.pull_places[t]) os << " pull " << net.place_ids[p];
            for (int p : net.push_places[t]) os << " push " << net.place_ids[p];
            if (!net.realizes_minus[t].empty()) {
                os << " minus";
                for (int psi : net.realizes_minus[t]) os << " " << m.capabilities[psi].id;
            }
            if (!net.realizes_plus[t].empty()) {
                os << " plus";
                for (int psi : net.realizes_plus[t]) os << " " << m.capabilities[psi].id;
            }
            os << "\n";
        }
        os << "}\n";
    }
    return os.str();
}

} // namespace hfn
