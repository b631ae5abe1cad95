#include "comove/message_log.hpp"

#include <algorithm>
#include <stdexcept>

namespace comove {

MessageLog::MessageLog(std::size_t capacity, int consumers)
    : cursor_(static_cast<std::size_t>(consumers), 0), capacity_(capacity) {
    if (capacity == 0 || consumers <= 0) {
        throw std::invalid_argument("message log needs capacity and at least one consumer");
    }
}

void MessageLog::retire_locked() {
    const std::size_t low = *std::min_element(cursor_.begin(), cursor_.end());
    bool freed = false;
    while (base_ < low && !buffer_.empty()) {
        buffer_.pop_front();
        ++base_;
        freed = true;
    }
    if (freed) {
        can_push_.notify_all();
    }
}

bool MessageLog::push(StreamRecord rec, bool block) {
    std::unique_lock lock(mutex_);
    if (closed_) {
        throw std::runtime_error("push to closed message log");
    }
    if (block) {
        can_push_.wait(lock, [&] { return buffer_.size() < capacity_ || closed_; });
        if (closed_) {
            return false;
        }
    } else if (buffer_.size() >= capacity_) {
        return false;
    }
    buffer_.push_back(std::move(rec));
    ++produced_;
    can_pop_.notify_all();
    return true;
}

std::optional<StreamRecord> MessageLog::pop(int consumer, bool block) {
    std::unique_lock lock(mutex_);
    auto& cur = cursor_[static_cast<std::size_t>(consumer)];
    if (block) {
        can_pop_.wait(lock, [&] { return cur < produced_ || closed_; });
    }
    if (cur >= produced_) {
        return std::nullopt;  // drained (or empty in non-blocking mode)
    }
    StreamRecord rec = buffer_[cur - base_];
    ++cur;
    retire_locked();
    return rec;
}

void MessageLog::close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    can_pop_.notify_all();
    can_push_.notify_all();
}

std::size_t MessageLog::lag(int consumer) const {
    std::lock_guard lock(mutex_);
    return produced_ - cursor_[static_cast<std::size_t>(consumer)];
}

std::size_t MessageLog::produced() const {
    std::lock_guard lock(mutex_);
    return produced_;
}

std::size_t MessageLog::backlog() const {
    std::lock_guard lock(mutex_);
    return buffer_.size();
}

}  // namespace comove
