# App Configuration
APP_NAME = "hawkes-calls"
APP_DESCRIPTION = (
    "Hawkes point-process modeling of dyadic call/text series: fitting, kernel "
    "comparison, relationship change detection and user embeddings"
)

# Output contracts
SCHEMA_VERSION = "1"
MANIFEST_SUFFIX = ".manifest.json"

# Progress bars go to stderr; disabled when stderr is not a terminal
PROGRESS_MIN_ITEMS = 20
