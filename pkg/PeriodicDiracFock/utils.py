import logging
import random
import string

from concurrent.futures import ThreadPoolExecutor



def uid(length=8):
    """
    Returns a unique string identifier, used to tag solver runs and records.
    """
    alphabet = string.ascii_lowercase + string.digits
    return ''.join(random.choices(alphabet, k=length))


def fiber_map(func, items, threads=1):
    """
    Apply `func` to every item and return the results in input order.

    Bloch fibers are independent once the current density matrix is fixed,
    so per-k-point work (diagonalization, exchange assembly) is farmed out
    to a thread pool when more than one thread is requested. numpy / LAPACK
    release the GIL for the heavy lifting.

    Arguments:
        - func: callable taking a single item
        - items: iterable of work items (typically k-point indices)
        - threads: number of worker threads; values <= 1 run serially
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(func, items))



class Loggable:
    """
    Base class for objects that need to grab a logger.
    """
    @property
    def logger(self):
        """
        Grab a handle to logger for the class, if it exists,
        otherwise use the default package logger.
        """
        if self.__class__.__name__ in logging.Logger.manager.loggerDict:
            return logging.getLogger(self.__class__.__name__)
        else:
            return logging.getLogger(__package__ or __name__)
