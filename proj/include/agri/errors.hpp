#pragma once

#include <stdexcept>
#include <string>

namespace agri {

/// Base for every domain error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Transient failures. The orchestrator retries these with backoff.
class RetryableError : public Error {
  public:
    using Error::Error;
};

#define AGRI_DEFINE_ERROR(Name, Base)     \
    class Name : public Base {            \
      public:                             \
        using Base::Base;                 \
    };

AGRI_DEFINE_ERROR(UnknownState, Error)
AGRI_DEFINE_ERROR(UplinkUnavailable, RetryableError)
AGRI_DEFINE_ERROR(UnknownFarm, Error)
AGRI_DEFINE_ERROR(DuplicatePhone, Error)
AGRI_DEFINE_ERROR(InsufficientData, Error)
AGRI_DEFINE_ERROR(DatastoreUnavailable, RetryableError)
AGRI_DEFINE_ERROR(EmptyDocument, Error)
AGRI_DEFINE_ERROR(UnknownPassage, Error)
AGRI_DEFINE_ERROR(ProviderUnavailable, RetryableError)
AGRI_DEFINE_ERROR(BackendTimeout, RetryableError)
AGRI_DEFINE_ERROR(UnsupportedLanguage, Error)
AGRI_DEFINE_ERROR(TemplateError, Error)
AGRI_DEFINE_ERROR(UnparseableIntent, Error)
AGRI_DEFINE_ERROR(SchemaError, Error)
AGRI_DEFINE_ERROR(GroundingViolation, Error)
AGRI_DEFINE_ERROR(PipelineExhausted, Error)
AGRI_DEFINE_ERROR(ProviderRejected, RetryableError)
AGRI_DEFINE_ERROR(ShapeError, Error)
AGRI_DEFINE_ERROR(JudgeUnavailable, Error)
AGRI_DEFINE_ERROR(EmptyAnswer, Error)
AGRI_DEFINE_ERROR(ConfigError, Error)
AGRI_DEFINE_ERROR(ScriptMismatch, Error)
AGRI_DEFINE_ERROR(LanguageMismatch, Error)

#undef AGRI_DEFINE_ERROR

/// Non-2xx response or transport failure from a model backend.
class BackendError : public RetryableError {
  public:
    BackendError(int status, const std::string& what)
        : RetryableError(what), status_(status) {}

    /// HTTP status, or 0 when no response was received.
    [[nodiscard]] int status() const noexcept { return status_; }

  private:
    int status_;
};

} // namespace agri
