"""Domain exception taxonomy shared across all modules."""


class PulseError(Exception):
    """Base class for every domain error this package raises."""


# --- ingestion ---

class UnreadableStream(PulseError):
    """An input stream failed mid-read (I/O error, truncated compression frame)."""


class UnknownFormat(PulseError):
    """Unsupported archive-format tag."""


class SchemaMismatch(PulseError):
    """A corpus CSV file does not carry the expected header or column types."""


# --- LLM gateway ---

class ProviderUnavailable(PulseError):
    """The completion provider could not be reached after retries."""


class AuthFailure(PulseError):
    """The provider rejected our credentials, or none were configured."""


class FixtureMiss(ProviderUnavailable):
    """Replay mode found no recorded response for a request hash."""

    def __init__(self, request_tag: str, request_hash: str):
        super().__init__(
            f"no recorded fixture for request tagged {request_tag!r} (hash {request_hash})"
        )
        self.request_tag = request_tag
        self.request_hash = request_hash


class MalformedOutput(PulseError):
    """The model never produced parseable JSON within the retry budget."""


class SchemaViolation(PulseError):
    """The model produced valid JSON that is missing required structure."""


# --- prompt library ---

class UnknownTemplate(PulseError):
    """No template registered under the requested id."""


class MissingVariable(PulseError):
    """A template placeholder was left unbound (or bound to an empty value)."""


# --- analysis pipeline ---

class EmptyCatalog(PulseError):
    """Source recommendation was asked to rank an empty catalog."""


class EmptyInput(PulseError):
    """A stage that requires at least one input item received none."""


class WrongCardinality(PulseError):
    """The model returned the wrong number of items even after a corrective retry."""


# --- report builder ---

class InconsistentInputs(PulseError):
    """Categorized quotes reference quotes absent from the extraction output."""


class MissingThread(PulseError):
    """A quote's source_id does not exist in the corpus being checked."""


# --- cache store ---

class CorruptEntry(PulseError):
    """A cache file failed validation on read; the entry was evicted."""
