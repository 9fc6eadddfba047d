def normalize_text(text: str) -> str:
    """Lowercase and collapse every whitespace run to a single space."""
    return " ".join(text.split()).lower()
