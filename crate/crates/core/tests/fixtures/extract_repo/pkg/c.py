import os


async def fetch(url):
    """Fetch a URL."""
    try:
        return await get(url)
    except ValueError:
        return None
    except (KeyError, OSError):
        raise


def single_quotes():
    '''Uses single quotes.'''
    return 1


def raw_doc():
    r"""Raw docstring with \d."""
    return 2


def not_doc():
    x = 1
    """A string after a statement is not a docstring."""
    return x
