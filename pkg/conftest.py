"""Configure Django so the app's SimpleTestCase suites run under pytest."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'pricefront.settings')
django.setup()
