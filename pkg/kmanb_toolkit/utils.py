"""Common Jinja2-based environment to get report templates from a common
path."""

from jinja2 import Environment, PackageLoader, select_autoescape

reportenv = Environment(
    loader=PackageLoader(
        package_name="kmanb_toolkit", package_path="_templates"
    ),
    autoescape=select_autoescape(),
    keep_trailing_newline=True,
    trim_blocks=True,
    lstrip_blocks=True,
)


def fmt(value: float, digits: int) -> str:
    """Fixed-point cell text for report tables.

    Examples:
        >>> fmt(0.98765, 2), fmt(2.98, 3)
        ('0.99', '2.980')
    """
    return f"{value:.{digits}f}"


reportenv.filters["fmt"] = fmt
