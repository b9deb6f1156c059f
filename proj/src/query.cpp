#include "causal/query.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "causal/errors.hpp"

namespace causal {

std::set<std::string> Atom::variable_set() const {
    std::set<std::string> out;
    for (const Term& t : terms)
        if (t.is_var()) out.insert(t.text);
    return out;
}

std::set<std::string> Query::variables() const {
    std::set<std::string> out;
    for (const Atom& a : atoms)
        for (const Term& t : a.terms)
            if (t.is_var()) out.insert(t.text);
    return out;
}

std::set<std::string> Query::constants() const {
    std::set<std::string> out;
    for (const Atom& a : atoms)
        for (const Term& t : a.terms)
            if (!t.is_var()) out.insert(t.text);
    return out;
}

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool lexes_as_integer(const std::string& s) {
    if (s.empty()) return false;
    size_t i = (s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

struct Token {
    enum class Kind { Ident, Integer, String, Punct, End };
    Kind kind = Kind::End;
    std::string text;  // punct: "(' ')' ',' '.' ':-' '=' '^n' '^x'";
    int line = 1, col = 1;
};

class Lexer {
  public:
    explicit Lexer(const std::string& text) : text_(text) { advance(); }

    const Token& peek() const { return tok_; }
    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

  private:
    void advance() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) step();
        tok_.line = line_;
        tok_.col = col_;
        if (pos_ >= text_.size()) {
            tok_ = {Token::Kind::End, "", line_, col_};
            return;
        }
        const char c = text_[pos_];
        if (is_ident_start(c)) {
            std::string s;
            while (pos_ < text_.size() && is_ident_char(text_[pos_])) { s += text_[pos_]; step(); }
            tok_ = {Token::Kind::Ident, s, tok_.line, tok_.col};
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && pos_ + 1 < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
            std::string s;
            if (text_[pos_] == '-') { s += '-'; step(); }
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) { s += text_[pos_]; step(); }
            tok_ = {Token::Kind::Integer, s, tok_.line, tok_.col};
            return;
        }
        if (c == '\'') {
            step();
            std::string s;
            while (true) {
                if (pos_ >= text_.size()) throw ParseError("unterminated string literal", tok_.line, tok_.col);
                const char d = text_[pos_];
                if (d == '\\') {
                    step();
                    if (pos_ >= text_.size()) throw ParseError("unterminated escape", line_, col_);
                    s += text_[pos_];
                    step();
                    continue;
                }
                if (d == '\'') { step(); break; }
                s += d;
                step();
            }
            tok_ = {Token::Kind::String, s, tok_.line, tok_.col};
            return;
        }
        if (c == ':' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '-') {
            step(); step();
            tok_ = {Token::Kind::Punct, ":-", tok_.line, tok_.col};
            return;
        }
        if (c == '^') {
            step();
            if (pos_ < text_.size() && (text_[pos_] == 'n' || text_[pos_] == 'x')) {
                const char mark = text_[pos_];
                step();
                // the marker must not continue into an identifier (R^num would be odd)
                if (pos_ < text_.size() && is_ident_char(text_[pos_]))
                    throw ParseError("annotation marker must be ^n or ^x", tok_.line, tok_.col);
                tok_ = {Token::Kind::Punct, std::string("^") + mark, tok_.line, tok_.col};
                return;
            }
            throw ParseError("expected 'n' or 'x' after '^'", tok_.line, tok_.col);
        }
        if (c == '(' || c == ')' || c == ',' || c == '.' || c == '=') {
            step();
            tok_ = {Token::Kind::Punct, std::string(1, c), tok_.line, tok_.col};
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
    }

    void step() {
        if (text_[pos_] == '\n') { ++line_; col_ = 1; } else { ++col_; }
        ++pos_;
    }

    const std::string& text_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_;
};

// Strips % comments and extracts @endogenous/@exogenous directive lines,
// replacing the consumed characters with spaces so token positions stay true
// to the original text.
std::string preprocess(const std::string& text,
                       std::map<std::string, Annotation>* directives) {
    std::string out = text;
    size_t line_start = 0;
    int line_no = 1;
    while (line_start <= out.size()) {
        size_t line_end = out.find('\n', line_start);
        if (line_end == std::string::npos) line_end = out.size();
        // comments
        for (size_t i = line_start; i < line_end; ++i) {
            if (out[i] == '%') {
                for (size_t j = i; j < line_end; ++j) out[j] = ' ';
                break;
            }
            if (out[i] == '\'') {  // don't treat % inside a string as a comment
                ++i;
                while (i < line_end && out[i] != '\'') {
                    if (out[i] == '\\') ++i;
                    ++i;
                }
            }
        }
        size_t first = line_start;
        while (first < line_end && std::isspace(static_cast<unsigned char>(out[first]))) ++first;
        if (first < line_end && out[first] == '@') {
            std::string line = out.substr(first, line_end - first);
            std::istringstream in(line);
            std::string keyword;
            in >> keyword;
            Annotation ann;
            if (keyword == "@endogenous") ann = Annotation::Endogenous;
            else if (keyword == "@exogenous") ann = Annotation::Exogenous;
            else throw ParseError("unknown directive '" + keyword + "'", line_no, static_cast<int>(first - line_start) + 1);
            std::string rest;
            std::getline(in, rest);
            std::string rel;
            auto flush = [&]() {
                if (rel.empty()) return;
                auto [it, inserted] = directives->emplace(rel, ann);
                if (!inserted && it->second != ann)
                    throw ParseError("relation '" + rel + "' declared both endogenous and exogenous", line_no, 1);
                rel.clear();
            };
            for (char c : rest) {
                if (c == ',') flush();
                else if (std::isspace(static_cast<unsigned char>(c))) { if (!rel.empty()) flush(); }
                else if (is_ident_char(c)) rel += c;
                else throw ParseError("malformed directive", line_no, 1);
            }
            flush();
            for (size_t j = first; j < line_end; ++j) out[j] = ' ';
        }
        line_start = line_end + 1;
        ++line_no;
    }
    return out;
}

struct ParsedEquality {
    std::string variable;
    std::string constant;
    int line, col;
};

Term parse_term(Lexer& lex) {
    Token t = lex.take();
    switch (t.kind) {
        case Token::Kind::Ident: return Term::var(t.text);
        case Token::Kind::Integer: return Term::constant(t.text);
        case Token::Kind::String: return Term::constant(t.text);
        default: throw ParseError("expected term", t.line, t.col);
    }
}

void expect_punct(Lexer& lex, const std::string& p) {
    Token t = lex.take();
    if (t.kind != Token::Kind::Punct || t.text != p)
        throw ParseError("expected '" + p + "'", t.line, t.col);
}

}  // namespace

Query parse_query(const std::string& text, const Schema* schema) {
    std::map<std::string, Annotation> directives;
    const std::string body_text = preprocess(text, &directives);

    Lexer lex(body_text);
    Query q;

    Token name = lex.take();
    if (name.kind != Token::Kind::Ident)
        throw ParseError("expected query name", name.line, name.col);
    q.name = name.text;

    if (lex.peek().kind == Token::Kind::Punct && lex.peek().text == "(") {
        lex.take();
        if (!(lex.peek().kind == Token::Kind::Punct && lex.peek().text == ")")) {
            while (true) {
                Token v = lex.take();
                if (v.kind != Token::Kind::Ident)
                    throw ParseError("expected head variable", v.line, v.col);
                if (std::find(q.head_vars.begin(), q.head_vars.end(), v.text) != q.head_vars.end())
                    throw ParseError("duplicate head variable '" + v.text + "'", v.line, v.col);
                q.head_vars.push_back(v.text);
                Token sep = lex.take();
                if (sep.kind == Token::Kind::Punct && sep.text == ",") continue;
                if (sep.kind == Token::Kind::Punct && sep.text == ")") break;
                throw ParseError("expected ',' or ')' in head", sep.line, sep.col);
            }
        } else {
            lex.take();
        }
    }

    expect_punct(lex, ":-");

    std::vector<ParsedEquality> equalities;
    while (true) {
        Token first = lex.take();
        if (first.kind == Token::Kind::Ident &&
            lex.peek().kind == Token::Kind::Punct && lex.peek().text == "=") {
            lex.take();
            Token rhs = lex.take();
            if (rhs.kind == Token::Kind::Punct)
                throw ParseError("expected constant after '='", rhs.line, rhs.col);
            equalities.push_back({first.text, rhs.text, first.line, first.col});
        } else if ((first.kind == Token::Kind::Integer || first.kind == Token::Kind::String) &&
                   lex.peek().kind == Token::Kind::Punct && lex.peek().text == "=") {
            lex.take();
            Token rhs = lex.take();
            if (rhs.kind != Token::Kind::Ident)
                throw ParseError("expected variable on one side of '='", rhs.line, rhs.col);
            equalities.push_back({rhs.text, first.text, first.line, first.col});
        } else if (first.kind == Token::Kind::Ident) {
            Atom atom;
            atom.relation = first.text;
            if (lex.peek().kind == Token::Kind::Punct &&
                (lex.peek().text == "^n" || lex.peek().text == "^x")) {
                atom.annotation = lex.take().text == "^n" ? Annotation::Endogenous
                                                          : Annotation::Exogenous;
            }
            expect_punct(lex, "(");
            if (!(lex.peek().kind == Token::Kind::Punct && lex.peek().text == ")")) {
                while (true) {
                    atom.terms.push_back(parse_term(lex));
                    Token sep = lex.take();
                    if (sep.kind == Token::Kind::Punct && sep.text == ",") continue;
                    if (sep.kind == Token::Kind::Punct && sep.text == ")") break;
                    throw ParseError("expected ',' or ')' in atom", sep.line, sep.col);
                }
            } else {
                lex.take();
            }
            if (atom.terms.empty())
                throw ParseError("atom '" + atom.relation + "' has no terms", first.line, first.col);
            q.atoms.push_back(std::move(atom));
        } else {
            throw ParseError("expected atom", first.line, first.col);
        }

        Token sep = lex.take();
        if (sep.kind == Token::Kind::Punct && sep.text == ",") continue;
        if (sep.kind == Token::Kind::Punct && sep.text == ".") break;
        throw ParseError("expected ',' or '.' after atom", sep.line, sep.col);
    }
    if (lex.peek().kind != Token::Kind::End) {
        Token t = lex.peek();
        throw ParseError("unexpected input after rule", t.line, t.col);
    }
    if (q.atoms.empty())
        throw ParseError("query has no atoms", name.line, name.col);

    // Fold equality predicates: substitute the constant for the variable.
    for (const ParsedEquality& eq : equalities) {
        const auto vars = q.variables();
        if (!vars.count(eq.variable))
            throw ParseError("equality mentions unknown variable '" + eq.variable + "'", eq.line, eq.col);
        if (std::find(q.head_vars.begin(), q.head_vars.end(), eq.variable) != q.head_vars.end())
            throw ParseError("equality binds head variable '" + eq.variable + "'", eq.line, eq.col);
        for (Atom& a : q.atoms)
            for (Term& t : a.terms)
                if (t.is_var() && t.text == eq.variable) t = Term::constant(eq.constant);
    }

    // Apply directives to atoms without an inline marker.
    for (Atom& a : q.atoms) {
        if (a.annotation == Annotation::Unspecified) {
            auto it = directives.find(a.relation);
            if (it != directives.end()) a.annotation = it->second;
        }
    }

    // Head safety.
    const auto vars = q.variables();
    for (const std::string& v : q.head_vars)
        if (!vars.count(v))
            throw ParseError("head variable '" + v + "' does not occur in the body", name.line, name.col);

    // Arity consistency, against the schema when given, else across atoms.
    std::map<std::string, size_t> seen_arity;
    for (const Atom& a : q.atoms) {
        if (schema) {
            auto it = schema->relations.find(a.relation);
            if (it == schema->relations.end())
                throw ParseError("unknown relation '" + a.relation + "'", name.line, name.col);
            if (static_cast<size_t>(it->second.arity) != a.terms.size())
                throw ParseError("relation '" + a.relation + "' expects arity " +
                                     std::to_string(it->second.arity) + ", got " +
                                     std::to_string(a.terms.size()),
                                 name.line, name.col);
        }
        auto [it, inserted] = seen_arity.emplace(a.relation, a.terms.size());
        if (!inserted && it->second != a.terms.size())
            throw ParseError("relation '" + a.relation + "' used with inconsistent arities",
                             name.line, name.col);
    }
    return q;
}

std::string print_term(const Term& t) {
    if (t.is_var()) return t.text;
    if (lexes_as_integer(t.text)) return t.text;
    std::string out = "'";
    for (char c : t.text) {
        if (c == '\'' || c == '\\') out += '\\';
        out += c;
    }
    out += '\'';
    return out;
}

std::string print_atom(const Atom& a) {
    std::string out = a.relation;
    if (a.annotation == Annotation::Endogenous) out += "^n";
    else if (a.annotation == Annotation::Exogenous) out += "^x";
    out += '(';
    for (size_t i = 0; i < a.terms.size(); ++i) {
        if (i) out += ", ";
        out += print_term(a.terms[i]);
    }
    out += ')';
    return out;
}

std::string print_query(const Query& q) {
    std::string out = q.name;
    if (!q.head_vars.empty()) {
        out += '(';
        for (size_t i = 0; i < q.head_vars.size(); ++i) {
            if (i) out += ", ";
            out += q.head_vars[i];
        }
        out += ')';
    }
    out += " :- ";
    for (size_t i = 0; i < q.atoms.size(); ++i) {
        if (i) out += ", ";
        out += print_atom(q.atoms[i]);
    }
    out += '.';
    return out;
}

Query specialize(const Query& q, const std::vector<std::string>& answer) {
    if (answer.size() != q.head_vars.size())
        throw NotApplicableError("answer has " + std::to_string(answer.size()) +
                                 " values but the query head has " +
                                 std::to_string(q.head_vars.size()));
    Query out = q;
    for (size_t i = 0; i < q.head_vars.size(); ++i) {
        for (Atom& a : out.atoms)
            for (Term& t : a.terms)
                if (t.is_var() && t.text == q.head_vars[i]) t = Term::constant(answer[i]);
    }
    out.head_vars.clear();
    return out;
}

bool has_self_join(const Query& q) {
    std::set<std::string> seen;
    for (const Atom& a : q.atoms)
        if (!seen.insert(a.relation).second) return true;
    return false;
}

std::map<std::string, std::set<int>> occurrence_sets(const Query& q) {
    std::map<std::string, std::set<int>> out;
    for (int i = 0; i < static_cast<int>(q.atoms.size()); ++i)
        for (const Term& t : q.atoms[i].terms)
            if (t.is_var()) out[t.text].insert(i);
    return out;
}

}  // namespace causal
