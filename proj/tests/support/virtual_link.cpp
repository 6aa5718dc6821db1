#include "virtual_link.hpp"

#include <algorithm>

namespace sshdecoy::testing {

namespace {
constexpr Millis kHorizon{10 * 60 * 1000};
}

VirtualLink::VirtualLink(EngineSettings settings, SessionFacts facts, MockScript script, SessionEvents* events)
    : engine_(std::move(settings), facts, events), shell_(std::move(script), facts.cols, facts.rows) {}

void VirtualLink::start() {
    engine_.on_host_data(shell_.start(), now_);
    settle();
}

void VirtualLink::type(ByteView keys) {
    engine_.on_client_data(keys, now_);
    settle();
}

Bytes VirtualLink::take_transcript() {
    Bytes out;
    out.swap(transcript_);
    return out;
}

void VirtualLink::pump() {
    for (;;) {
        bool moved = false;
        const Bytes up = engine_.take_to_host();
        if (!up.empty()) {
            moved = true;
            const Bytes down = shell_.feed(up, now_);
            if (!down.empty()) engine_.on_host_data(down, now_);
        }
        const Bytes shown = engine_.take_to_client();
        if (!shown.empty()) {
            moved = true;
            transcript_ += shown;
        }
        if (!moved) return;
    }
}

void VirtualLink::settle() {
    const Millis limit = now_ + kHorizon;
    pump();
    while (now_ < limit) {
        auto a = engine_.next_deadline();
        auto b = shell_.next_deadline();
        if (!a && !b) break;
        Millis next = limit;
        if (a) next = std::min(next, *a);
        if (b) next = std::min(next, *b);
        now_ = std::max(now_, next);
        const Bytes down = shell_.tick(now_);
        if (!down.empty()) engine_.on_host_data(down, now_);
        engine_.on_tick(now_);
        pump();
    }
}

DirectLink::DirectLink(MockScript script, int cols, int rows) : shell_(std::move(script), cols, rows) {}

void DirectLink::start() { transcript_ += shell_.start(); }

void DirectLink::type(ByteView keys) {
    transcript_ += shell_.feed(keys, now_);
    settle();
}

void DirectLink::settle() {
    while (auto d = shell_.next_deadline()) {
        now_ = std::max(now_, *d);
        transcript_ += shell_.tick(now_);
    }
}

Bytes DirectLink::take_transcript() {
    Bytes out;
    out.swap(transcript_);
    return out;
}

}  // namespace sshdecoy::testing
