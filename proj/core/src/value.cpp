// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/value.hpp"

#include <bit>
#include <cstdio>

#include "polenv/error.hpp"

namespace polenv {

namespace {

constexpr char kHex[] = "0123456789abcdef";

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0x0f]);
    }
    return out;
}

std::vector<std::uint8_t> from_hex(const std::string& hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw Error(ErrorCode::InvalidArgument, "invalid hex digit in blob literal");
    };
    if (hex.size() % 2 != 0) throw Error(ErrorCode::InvalidArgument, "odd-length blob literal");
    std::vector<std::uint8_t> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return out;
}

void append_u64(std::string& out, std::uint64_t x) {
    for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<char>((x >> shift) & 0xff));
}

} // namespace

json to_json(const Value& v) {
    struct Visitor {
        json operator()(std::monostate) const { return nullptr; }
        json operator()(std::int64_t i) const { return i; }
        json operator()(double d) const { return d; }
        json operator()(const std::string& s) const { return s; }
        json operator()(const Blob& b) const { return json{{"$blob", to_hex(b.bytes)}}; }
    };
    return std::visit(Visitor{}, v);
}

Value value_from_json(const json& j) {
    switch (j.type()) {
    case json::value_t::null: return std::monostate{};
    case json::value_t::boolean: return static_cast<std::int64_t>(j.get<bool>() ? 1 : 0);
    case json::value_t::number_integer: return j.get<std::int64_t>();
    case json::value_t::number_unsigned: return static_cast<std::int64_t>(j.get<std::uint64_t>());
    case json::value_t::number_float: return j.get<double>();
    case json::value_t::string: return j.get<std::string>();
    case json::value_t::object:
        if (j.size() == 1 && j.contains("$blob") && j["$blob"].is_string())
            return Blob{from_hex(j["$blob"].get<std::string>())};
        [[fallthrough]];
    default:
        throw Error(ErrorCode::InvalidArgument, "value must be a JSON scalar, got: " + j.dump());
    }
}

void append_encoded(std::string& out, const Value& v) {
    // Tag byte first, so rows sort by storage class before payload.
    switch (v.index()) {
    case 0:
        out.push_back('\x00');
        break;
    case 1: {
        out.push_back('\x01');
        auto u = static_cast<std::uint64_t>(std::get<std::int64_t>(v)) ^ (std::uint64_t{1} << 63);
        append_u64(out, u);
        break;
    }
    case 2: {
        out.push_back('\x02');
        auto bits = std::bit_cast<std::uint64_t>(std::get<double>(v));
        // Flip so that byte order matches numeric order.
        bits = (bits & (std::uint64_t{1} << 63)) ? ~bits : bits | (std::uint64_t{1} << 63);
        append_u64(out, bits);
        break;
    }
    case 3: {
        const auto& s = std::get<std::string>(v);
        out.push_back('\x03');
        append_u64(out, s.size());
        out.append(s);
        break;
    }
    case 4: {
        const auto& b = std::get<Blob>(v).bytes;
        out.push_back('\x04');
        append_u64(out, b.size());
        out.append(b.begin(), b.end());
        break;
    }
    }
}

std::string encode_row(const Row& row) {
    std::string out;
    for (const auto& v : row) append_encoded(out, v);
    return out;
}

std::string render(const Value& v) {
    struct Visitor {
        std::string operator()(std::monostate) const { return "NULL"; }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", d);
            return buf;
        }
        std::string operator()(const std::string& s) const {
            std::string out = "'";
            for (char c : s) {
                if (c == '\'') out.push_back('\'');
                out.push_back(c);
            }
            out.push_back('\'');
            return out;
        }
        std::string operator()(const Blob& b) const { return "X'" + to_hex(b.bytes) + "'"; }
    };
    return std::visit(Visitor{}, v);
}

} // namespace polenv
