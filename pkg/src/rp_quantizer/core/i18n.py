from importlib import resources
import yaml


DEFAULT_LANGUAGE = "en-US"


class Messages:
    def __init__(self, language: str = DEFAULT_LANGUAGE):
        self.language = language
        self.messages: dict[str, str] = {}

        for lang in [language, DEFAULT_LANGUAGE]:
            try:
                base = resources.files("rp_quantizer.core").joinpath("locales")
                with resources.as_file(base / f"{lang}.yaml") as src:
                    with open(src, "r", encoding="utf-8") as f:
                        self.messages = yaml.safe_load(f) or {}
                        return
            except Exception:
                continue

    def t(self, key: str, **kwargs) -> str:
        s = self.messages.get(key, key)
        try:
            return s.format(**kwargs)
        except Exception:
            return s


# The numerical modules are plain functions; they read error text from this
# process-wide catalog, which the CLI switches to the configured language.
_active = Messages()


def set_language(language: str) -> Messages:
    global _active
    if language != _active.language:
        _active = Messages(language)
    return _active


def messages() -> Messages:
    return _active
