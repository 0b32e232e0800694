"""Exception types shared across the package."""


class VtaError(Exception):
    """Base class for all errors raised by this package."""

    code = "vta_error"

    def __init__(self, message: str, detail: str = ""):
        super().__init__(message)
        self.message = message
        self.detail = detail


# --- identifiers and stores ---

class InvalidId(VtaError):
    code = "invalid_id"


class DuplicateCourse(VtaError):
    code = "duplicate_course"


class UnknownCourse(VtaError):
    code = "unknown_course"


class DuplicateTitle(VtaError):
    code = "duplicate_title"


class InvalidSegments(VtaError):
    code = "invalid_segments"


class EmptyInput(VtaError):
    code = "empty_input"


class InvalidTranscript(VtaError):
    code = "invalid_transcript"


class UnknownStudent(VtaError):
    code = "unknown_student"


class EmptyQuery(VtaError):
    code = "empty_query"


class UnknownSession(VtaError):
    code = "unknown_session"


class UnknownPost(VtaError):
    code = "unknown_post"


# --- retrieval ---

class EmptyCorpus(VtaError):
    code = "empty_corpus"


class DimensionMismatch(VtaError):
    code = "dimension_mismatch"


# --- providers and generation ---

class ProviderUnavailable(VtaError):
    code = "provider_unavailable"


class ProviderTransportError(ProviderUnavailable):
    """Transient transport failure; the gateway retries these."""

    code = "provider_transport"


class ProviderContentError(ProviderUnavailable):
    """Provider-reported request/content error; never retried."""

    code = "provider_content"


class ProviderMalformedOutput(VtaError):
    code = "provider_malformed_output"


class TemplateUnbound(VtaError):
    code = "template_unbound"


class UnknownTemplate(VtaError):
    code = "unknown_template"


class BudgetExceeded(VtaError):
    code = "budget_exceeded"


class NoRuleMatched(VtaError):
    code = "no_rule_matched"


# --- fusion pipeline ---

class EmptyInstructorKnowledge(VtaError):
    code = "empty_instructor_knowledge"


class UncitedResponse(VtaError):
    code = "uncited_response"


# --- service workflows ---

class InvalidTransition(VtaError):
    code = "invalid_transition"


class EmptyScores(VtaError):
    code = "empty_scores"
